//! Slow-timescale stiffness law `k(t_s) = k₀ exp(−r t_s)`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TwinError};

/// Default decay constant, per day.
pub const DEFAULT_DECAY_RATE: f64 = 0.5e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationSchedule {
    pub k0: Vec<f64>,
    /// Decay constant in 1/day.
    pub rate: f64,
    #[serde(default)]
    pub frozen_indices: Vec<usize>,
}

impl DegradationSchedule {
    pub fn new(k0: Vec<f64>, rate: f64, frozen_indices: Vec<usize>) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(TwinError::invalid("rate", "must be finite and non-negative"));
        }
        if let Some(&f) = frozen_indices.iter().find(|&&f| f >= k0.len()) {
            return Err(TwinError::IndexOutOfRange {
                context: "frozen_indices",
                index: f,
                len: k0.len(),
            });
        }
        Ok(Self { k0, rate, frozen_indices })
    }

    /// Schedule for a system's nominal stiffness and frozen set at the default rate.
    pub fn for_system(system: &crate::model::MdofSystem) -> Self {
        Self {
            k0: system.stiffnesses().to_vec(),
            rate: DEFAULT_DECAY_RATE,
            frozen_indices: system.frozen_indices().to_vec(),
        }
    }

    /// Degradation factor δ(t_s) ∈ (0, 1].
    pub fn factor(&self, t_s: f64) -> Result<f64> {
        if t_s < 0.0 || t_s.is_nan() {
            return Err(TwinError::NegativeTime(t_s));
        }
        Ok((-self.rate * t_s).exp())
    }

    pub fn is_frozen(&self, index: usize) -> bool {
        self.frozen_indices.contains(&index)
    }
}

/// Stiffness vector at slow time `t_s` (days).
pub fn degraded_stiffness(schedule: &DegradationSchedule, t_s: f64) -> Result<Vec<f64>> {
    let delta = schedule.factor(t_s)?;
    Ok(schedule
        .k0
        .iter()
        .enumerate()
        .map(|(i, &k)| if schedule.is_frozen(i) { k } else { k * delta })
        .collect())
}
