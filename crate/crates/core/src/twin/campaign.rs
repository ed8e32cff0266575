//! Synthetic campaigns on the slow timescale.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::synth::{synthesize_window, SynthesisConfig};
use super::window::MeasurementWindow;
use crate::error::{Result, TwinError};
use crate::gpr::GpConfig;
use crate::model::{degraded_stiffness, DegradationSchedule, MdofSystem, DEFAULT_DECAY_RATE};
use crate::rng::window_seed;
use crate::sde::{Scheme, DEFAULT_DT};
use crate::ukf::FilterConfig;

/// Everything that controls window generation, filtering and tracking.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    /// Days between windows.
    pub window_interval: f64,
    /// Seconds of data per window.
    pub window_duration: f64,
    /// Last window time, days.
    pub horizon: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub accel_snr: f64,
    pub force_snr: f64,
    /// Zero-based; empty means every DOF.
    pub observed_dofs: Vec<usize>,
    pub master_seed: u64,
    /// 1/day.
    pub decay_rate: f64,
    /// Stiffness indices estimated by the filter; empty means all.
    pub augment: Vec<usize>,
    /// First-window guess as a multiple of nominal.
    pub initial_guess_factor: f64,
    /// Explicit first-window guess, one entry per augmented index.
    pub initial_guess: Option<Vec<f64>>,
    /// Prior standard deviation of frozen parameters relative to nominal.
    pub frozen_prior_relative_std: f64,
    /// GP models only see windows with `t_s <= cutoff`.
    pub cutoff_days: Option<f64>,
    /// Accepted windows needed before the first GP fit.
    pub min_gp_points: usize,
    pub filter: FilterConfig,
    pub gp: GpConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            window_interval: 50.0,
            window_duration: 5.0,
            horizon: 2000.0,
            dt: DEFAULT_DT,
            scheme: Scheme::Taylor15,
            accel_snr: 50.0,
            force_snr: 20.0,
            observed_dofs: Vec::new(),
            master_seed: 0,
            decay_rate: DEFAULT_DECAY_RATE,
            augment: Vec::new(),
            initial_guess_factor: 0.8,
            initial_guess: None,
            frozen_prior_relative_std: 1e-3,
            cutoff_days: None,
            min_gp_points: 3,
            filter: FilterConfig::default(),
            gp: GpConfig::default(),
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self, system: &MdofSystem) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(TwinError::invalid(name, format!("must be positive and finite, got {v}")))
            }
        };
        pos("window_interval", self.window_interval)?;
        pos("window_duration", self.window_duration)?;
        pos("dt", self.dt)?;
        pos("accel_snr", self.accel_snr)?;
        pos("force_snr", self.force_snr)?;
        pos("initial_guess_factor", self.initial_guess_factor)?;
        pos("frozen_prior_relative_std", self.frozen_prior_relative_std)?;
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(TwinError::invalid("horizon", "must be finite and non-negative"));
        }
        if !(self.decay_rate >= 0.0) || !self.decay_rate.is_finite() {
            return Err(TwinError::invalid("decay_rate", "must be finite and non-negative"));
        }
        if self.min_gp_points < 3 {
            return Err(TwinError::invalid("min_gp_points", "GP fits need at least 3 points"));
        }
        let n = system.n_dof();
        for &d in self.observed_dofs.iter() {
            if d >= n {
                return Err(TwinError::IndexOutOfRange {
                    context: "observed DOF",
                    index: d,
                    len: n,
                });
            }
        }
        for &p in self.augment.iter() {
            if p >= n {
                return Err(TwinError::IndexOutOfRange {
                    context: "augmented parameter",
                    index: p,
                    len: n,
                });
            }
        }
        if let Some(g) = &self.initial_guess {
            if g.len() != self.augmented(system).len() {
                return Err(TwinError::Dimension {
                    context: "initial guess",
                    expected: self.augmented(system).len(),
                    actual: g.len(),
                });
            }
        }
        self.gp.validate()
    }

    pub fn observed(&self, system: &MdofSystem) -> Vec<usize> {
        if self.observed_dofs.is_empty() {
            (0..system.n_dof()).collect()
        } else {
            self.observed_dofs.clone()
        }
    }

    pub fn augmented(&self, system: &MdofSystem) -> Vec<usize> {
        if self.augment.is_empty() {
            (0..system.n_dof()).collect()
        } else {
            self.augment.clone()
        }
    }

    /// Window times `0, Δ, 2Δ, …` up to the horizon.
    pub fn window_times(&self) -> Vec<f64> {
        let n = (self.horizon / self.window_interval + 1e-9).floor() as usize;
        (0..=n).map(|i| i as f64 * self.window_interval).collect()
    }

    pub fn synthesis(&self, system: &MdofSystem) -> SynthesisConfig {
        SynthesisConfig {
            duration: self.window_duration,
            dt: self.dt,
            scheme: self.scheme,
            accel_snr: self.accel_snr,
            force_snr: self.force_snr,
            observed_dofs: self.observed(system),
        }
    }

    pub fn schedule(&self, system: &MdofSystem) -> DegradationSchedule {
        DegradationSchedule {
            k0: system.stiffnesses().to_vec(),
            rate: self.decay_rate,
            frozen_indices: system.frozen_indices().to_vec(),
        }
    }
}

/// Simulates every window of a campaign. Window `i` uses seed
/// `window_seed(master_seed, i)` and the degraded stiffness at its `t_s`.
pub fn generate_campaign(
    system: &MdofSystem,
    schedule: &DegradationSchedule,
    cfg: &CampaignConfig,
) -> Result<Vec<MeasurementWindow>> {
    cfg.validate(system)?;
    if schedule.k0.len() != system.n_dof() {
        return Err(TwinError::Dimension {
            context: "degradation schedule",
            expected: system.n_dof(),
            actual: schedule.k0.len(),
        });
    }
    let synth = cfg.synthesis(system);
    cfg.window_times()
        .into_par_iter()
        .enumerate()
        .map(|(i, t_s)| {
            let k = degraded_stiffness(schedule, t_s)?;
            synthesize_window(system, &k, t_s, &synth, window_seed(cfg.master_seed, i))
        })
        .enumerate()
        .map(|(i, r)| r.map_err(|e| TwinError::Window { window: i, source: Box::new(e) }))
        .collect()
}
