//! Synthetic measurement windows.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::window::{MeasurementWindow, Provenance};
use crate::error::{Result, TwinError};
use crate::model::{to_state_space, MdofSystem};
use crate::rng::{stream_rng, streams};
use crate::sde::{corrupt_with_snr, grid_len, harmonic_forces, simulate_forced, IntegratorConfig, Scheme, DEFAULT_DT};

/// How one synthetic window is produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    /// Seconds.
    pub duration: f64,
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    pub accel_snr: f64,
    pub force_snr: f64,
    /// Zero-based DOFs whose accelerations are recorded.
    pub observed_dofs: Vec<usize>,
}

impl SynthesisConfig {
    pub fn full(n_dof: usize) -> Self {
        Self {
            duration: 5.0,
            dt: DEFAULT_DT,
            scheme: Scheme::Taylor15,
            accel_snr: 50.0,
            force_snr: 20.0,
            observed_dofs: (0..n_dof).collect(),
        }
    }
}

/// Adds SNR-calibrated noise to every channel that carries signal; silent
/// channels stay zero.
fn corrupt_active_channels<R: Rng>(signal: &DMatrix<f64>, snr: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    let active: Vec<usize> = (0..signal.ncols())
        .filter(|&j| {
            let c = signal.column(j);
            let first = c[0];
            c.iter().any(|&v| v != first)
        })
        .collect();
    let sub = signal.select_columns(&active);
    let noisy = corrupt_with_snr(&sub, snr, rng)?;
    let mut out = signal.clone();
    for (k, &j) in active.iter().enumerate() {
        out.set_column(j, &noisy.column(k));
    }
    Ok(out)
}

/// Simulates one window of `system` at the given stiffness: the force is
/// corrupted first and drives the Taylor 1.5 integration, then the
/// restoring accelerations at the observed DOFs are corrupted.
pub fn synthesize_window(
    system: &MdofSystem,
    stiffness: &[f64],
    t_s: f64,
    cfg: &SynthesisConfig,
    seed: u64,
) -> Result<MeasurementWindow> {
    let sys = system.with_stiffnesses(stiffness)?;
    let model = to_state_space(&sys, &[])?;
    let n = grid_len(cfg.duration, cfg.dt)?;
    for &d in &cfg.observed_dofs {
        if d >= sys.n_dof() {
            return Err(TwinError::IndexOutOfRange {
                context: "observed DOF",
                index: d,
                len: sys.n_dof(),
            });
        }
    }
    if cfg.observed_dofs.is_empty() {
        return Err(TwinError::EmptySelection("observed DOF set"));
    }
    let clean = harmonic_forces(&sys, n, cfg.dt);
    let force = corrupt_active_channels(&clean, cfg.force_snr, &mut stream_rng(seed, streams::FORCE_NOISE))?;
    let integ = IntegratorConfig {
        dt: cfg.dt,
        scheme: cfg.scheme,
        seed,
    };
    let tr = simulate_forced(&model, &DVector::zeros(model_dim(&model)), &force, &integ)?;
    let acc = tr.accelerations.select_columns(&cfg.observed_dofs);
    let accel = corrupt_with_snr(&acc, cfg.accel_snr, &mut stream_rng(seed, streams::ACCEL_NOISE))?;
    Ok(MeasurementWindow {
        t_s,
        times: tr.times,
        accel,
        force,
        observed_dofs: cfg.observed_dofs.clone(),
        provenance: Provenance::Synthetic {
            seed,
            true_stiffness: stiffness.to_vec(),
        },
    })
}

fn model_dim(model: &crate::model::StateSpaceModel) -> usize {
    use crate::sde::SdeModel;
    model.dim()
}
