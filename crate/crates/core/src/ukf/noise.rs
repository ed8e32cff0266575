//! Process and measurement noise covariances.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TwinError};
use crate::model::StateSpaceModel;
use crate::sde::{sample_std, SdeModel};

/// User adjustments applied on top of `q_c q_cᵀ`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProcessNoiseConfig {
    /// Element-wise multipliers for the diagonal of `q_c q_cᵀ`, one per state
    /// entry. Empty means all ones.
    #[serde(default)]
    pub scale: Vec<f64>,
    /// Variance added per step to each augmented parameter entry. Empty
    /// means zero (the parameters are constants).
    #[serde(default)]
    pub parameter_variance: Vec<f64>,
}

/// State-dependent process noise `Q(m⁻) = q_c q_cᵀ` with
/// `q_c = √Δt · diag(b(m⁻))`.
#[derive(Clone, Debug)]
pub struct ProcessNoise {
    model: StateSpaceModel,
    dt: f64,
    scale: DVector<f64>,
    parameter_variance: DVector<f64>,
}

pub fn build_process_noise(model: &StateSpaceModel, dt: f64, cfg: &ProcessNoiseConfig) -> Result<ProcessNoise> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(TwinError::invalid("dt", "must be positive and finite"));
    }
    let dim = model.dim();
    let scale = if cfg.scale.is_empty() {
        DVector::from_element(dim, 1.0)
    } else if cfg.scale.len() == dim {
        DVector::from_column_slice(&cfg.scale)
    } else {
        return Err(TwinError::Dimension {
            context: "process noise scale factors",
            expected: dim,
            actual: cfg.scale.len(),
        });
    };
    let p = model.augmented().len();
    let parameter_variance = if cfg.parameter_variance.is_empty() {
        DVector::zeros(p)
    } else if cfg.parameter_variance.len() == p {
        DVector::from_column_slice(&cfg.parameter_variance)
    } else {
        return Err(TwinError::Dimension {
            context: "parameter process variance",
            expected: p,
            actual: cfg.parameter_variance.len(),
        });
    };
    if scale.iter().chain(parameter_variance.iter()).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(TwinError::invalid("process noise", "factors must be finite and non-negative"));
    }
    Ok(ProcessNoise {
        model: model.clone(),
        dt,
        scale,
        parameter_variance,
    })
}

impl ProcessNoise {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `q_c` evaluated at the predicted mean (diagonal, returned as a vector).
    pub fn qc(&self, predicted_mean: &DVector<f64>) -> DVector<f64> {
        self.model.dispersion_row_scales(predicted_mean.as_slice()) * self.dt.sqrt()
    }

    pub fn covariance(&self, predicted_mean: &DVector<f64>) -> DMatrix<f64> {
        let qc = self.qc(predicted_mean);
        let mut diag = qc.component_mul(&qc).component_mul(&self.scale);
        let base = 2 * self.model.n_dof();
        for (j, v) in self.parameter_variance.iter().enumerate() {
            diag[base + j] += v;
        }
        DMatrix::from_diagonal(&diag)
    }
}

/// How the measurement covariance `R` is obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeasurementNoise {
    /// Noise injected at a known SNR: per channel,
    /// `σ²_noise = var(noisy) / (1 + snr)`.
    FromSnr { snr: f64 },
    /// User-supplied variances, one per observed channel.
    Explicit { variances: Vec<f64> },
}

impl Default for MeasurementNoise {
    fn default() -> Self {
        MeasurementNoise::FromSnr { snr: 50.0 }
    }
}

impl MeasurementNoise {
    /// Diagonal `R` for the measured series (rows = samples).
    pub fn covariance(&self, measured: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let p = measured.ncols();
        let variances: Vec<f64> = match self {
            MeasurementNoise::FromSnr { snr } => {
                if !(*snr > 0.0) || !snr.is_finite() {
                    return Err(TwinError::invalid("snr", "must be positive and finite"));
                }
                (0..p)
                    .map(|j| {
                        let s = sample_std(measured.column(j).iter().copied());
                        if s > 0.0 {
                            Ok(s * s / (1.0 + snr))
                        } else {
                            Err(TwinError::ZeroVariance { channel: j })
                        }
                    })
                    .collect::<Result<_>>()?
            }
            MeasurementNoise::Explicit { variances } => {
                if variances.len() != p {
                    return Err(TwinError::Dimension {
                        context: "measurement noise variances",
                        expected: p,
                        actual: variances.len(),
                    });
                }
                if variances.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                    return Err(TwinError::invalid("variances", "must be positive and finite"));
                }
                variances.clone()
            }
        };
        Ok(DMatrix::from_diagonal(&DVector::from_vec(variances)))
    }
}
