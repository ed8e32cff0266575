use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum TwinError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("index {index} out of range for {context} (len {len})")]
    IndexOutOfRange {
        context: &'static str,
        index: usize,
        len: usize,
    },

    #[error("empty selection: {0}")]
    EmptySelection(&'static str),

    #[error("slow time must be non-negative, got {0}")]
    NegativeTime(f64),

    #[error("signal channel {channel} has zero variance; SNR is undefined")]
    ZeroVariance { channel: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("sigma point {index} produced a non-finite value")]
    NonFiniteSigmaPoint { index: usize },

    #[error("filter failed at sample {sample}: {source}")]
    FilterStep {
        sample: usize,
        #[source]
        source: Box<TwinError>,
    },

    #[error("window {window}: {source}")]
    Window {
        window: usize,
        #[source]
        source: Box<TwinError>,
    },

    #[error("GP training did not converge from any restart (best nll {best_nll:.6e})")]
    GpTraining {
        best_log_params: Vec<f64>,
        best_nll: f64,
    },

    #[error("GP training for parameter {index} failed: {source}")]
    ParameterTrack {
        index: usize,
        #[source]
        source: Box<TwinError>,
    },

    #[error("no trained GP models available")]
    Untrained,

    #[error("window at t_s = {t_s} is not later than the last processed window ({last})")]
    OutOfOrder { t_s: f64, last: f64 },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl TwinError {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        TwinError::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// True for errors that come from floating-point breakdown rather than
    /// bad input or I/O.
    pub fn is_numeric(&self) -> bool {
        match self {
            TwinError::Numeric(_) | TwinError::NonFiniteSigmaPoint { .. } => true,
            TwinError::FilterStep { source, .. }
            | TwinError::Window { source, .. }
            | TwinError::ParameterTrack { source, .. } => source.is_numeric(),
            TwinError::GpTraining { .. } => true,
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, TwinError>;
