use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, GpConfig, GpModel};
use crate::error::{Result, TwinError};

/// Slow-time history of one estimated parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSeries {
    /// Stiffness index.
    pub index: usize,
    pub t_s: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default)]
    pub std_devs: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackedParameter {
    pub index: usize,
    pub model: GpModel,
}

/// Trains one independent GP per series.
pub fn track_parameters(series: &[ParameterSeries], cfg: &GpConfig) -> Result<Vec<TrackedParameter>> {
    series
        .par_iter()
        .map(|s| {
            train(&s.t_s, &s.values, s.std_devs.as_deref(), cfg)
                .map(|model| TrackedParameter { index: s.index, model })
                .map_err(|e| TwinError::ParameterTrack {
                    index: s.index,
                    source: Box::new(e),
                })
        })
        .collect()
}
