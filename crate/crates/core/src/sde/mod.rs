//! Forward integration of Itô SDEs `dy = a(y, u) dt + b(y) dW`.
//!
//! Two schemes are provided: Euler–Maruyama, used as the low-fidelity
//! transition inside the filter, and the order-1.5 strong Taylor scheme used
//! for synthetic data generation and response prediction. The Taylor scheme
//! needs the Kolmogorov operators
//!
//! ```text
//! L⁰ = Σᵢ aᵢ ∂ᵢ + ½ Σᵢⱼ (b bᵀ)ᵢⱼ ∂ᵢ∂ⱼ        Lʲ = Σₖ bₖⱼ ∂ₖ
//! ```
//!
//! applied to `a` and to the columns of `b`. Models supply the required
//! derivatives through [`SdeModel`]; the default methods fall back to
//! central finite differences.

pub mod fd;
mod convergence;
mod noise;
mod trajectory;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TwinError};
use crate::model::StateSpaceModel;
use crate::rng::{stream_rng, streams};

pub use convergence::{log_log_slope, strong_error_study, OrnsteinUhlenbeck, StrongErrorPoint};
pub use noise::{corrupt_with_snr, noise_std_for_snr, sample_std};
pub use trajectory::Trajectory;

/// Default fast-time step, seconds.
pub const DEFAULT_DT: f64 = 1e-3;

/// Drift/dispersion description of an SDE with an external input `u`.
pub trait SdeModel {
    fn dim(&self) -> usize;

    /// Number of independent Wiener channels (columns of `b`).
    fn noise_dim(&self) -> usize;

    fn drift(&self, y: &DVector<f64>, input: &[f64]) -> DVector<f64>;

    fn dispersion(&self, y: &DVector<f64>) -> DMatrix<f64>;

    /// `∂a/∂y`.
    fn drift_jacobian(&self, y: &DVector<f64>, input: &[f64]) -> DMatrix<f64> {
        fd::jacobian(&|z| self.drift(z, input), y)
    }

    /// `Σᵢⱼ Wᵢⱼ ∂ᵢ∂ⱼ a` for a symmetric weight matrix `W`.
    fn drift_hessian_contraction(&self, y: &DVector<f64>, input: &[f64], weight: &DMatrix<f64>) -> DVector<f64> {
        fd::hessian_contraction(&|z| self.drift(z, input), y, weight)
    }

    /// Directional derivative `Σₗ dₗ ∂ₗ b`.
    fn dispersion_derivative(&self, y: &DVector<f64>, direction: &DVector<f64>) -> DMatrix<f64> {
        fd::directional_matrix(&|z| self.dispersion(z), y, direction)
    }

    /// `Σᵢⱼ Wᵢⱼ ∂ᵢ∂ⱼ b`.
    fn dispersion_hessian_contraction(&self, y: &DVector<f64>, weight: &DMatrix<f64>) -> DMatrix<f64> {
        fd::hessian_contraction_matrix(&|z| self.dispersion(z), y, weight)
    }

    /// True when `b` does not depend on the state, in which case every
    /// `L(b)` term of the Taylor scheme is identically zero.
    fn has_additive_noise(&self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    EulerMaruyama,
    #[default]
    Taylor15,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub seed: u64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            scheme: Scheme::Taylor15,
            seed: 0,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(TwinError::invalid("dt", "must be positive and finite"));
        }
        Ok(())
    }
}

/// Brownian increment `Δw` and the associated double integral
/// `Δz = ∫ₜ^{t+Δt} (W(s) − W(t)) ds`, one entry per noise channel.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianIncrementPair {
    pub dw: DVector<f64>,
    pub dz: DVector<f64>,
}

impl BrownianIncrementPair {
    pub fn zeros(channels: usize) -> Self {
        Self {
            dw: DVector::zeros(channels),
            dz: DVector::zeros(channels),
        }
    }

    /// Draws `Δw = √Δt U₁`, `Δz = ½ Δt^{3/2} (U₁ + U₂/√3)` per channel, which
    /// has the exact joint moments `E[Δw²] = Δt`, `E[ΔwΔz] = Δt²/2`,
    /// `E[Δz²] = Δt³/3`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, dt: f64, channels: usize) -> Self {
        let sq = dt.sqrt();
        let mut dw = DVector::zeros(channels);
        let mut dz = DVector::zeros(channels);
        for j in 0..channels {
            let u1: f64 = rng.sample(StandardNormal);
            let u2: f64 = rng.sample(StandardNormal);
            dw[j] = sq * u1;
            dz[j] = 0.5 * dt * sq * (u1 + u2 / 3f64.sqrt());
        }
        Self { dw, dz }
    }

    /// Combines consecutive fine increments (each of length `dt_fine`) into
    /// the increment pair of the enclosing coarse step. Exact: the coarse
    /// `Δz` accumulates each fine `Δz` plus the running `W` offset times `dt_fine`.
    pub fn aggregate(fine: &[BrownianIncrementPair], dt_fine: f64) -> Self {
        let m = fine.first().map_or(0, |p| p.dw.len());
        let mut w = DVector::zeros(m);
        let mut z = DVector::zeros(m);
        for p in fine {
            z += &p.dz + &w * dt_fine;
            w += &p.dw;
        }
        Self { dw: w, dz: z }
    }
}

fn check_finite(v: &DVector<f64>, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(TwinError::Numeric(format!("non-finite {what}")))
    }
}

fn check_dims<M: SdeModel + ?Sized>(model: &M, y: &DVector<f64>, dw: &DVector<f64>) -> Result<()> {
    if y.len() != model.dim() {
        return Err(TwinError::Dimension {
            context: "state vector",
            expected: model.dim(),
            actual: y.len(),
        });
    }
    if dw.len() != model.noise_dim() {
        return Err(TwinError::Dimension {
            context: "Brownian increment",
            expected: model.noise_dim(),
            actual: dw.len(),
        });
    }
    Ok(())
}

/// One Euler–Maruyama step `y + a Δt + b Δw`.
pub fn em_step<M: SdeModel + ?Sized>(
    model: &M,
    y: &DVector<f64>,
    input: &[f64],
    dw: &DVector<f64>,
    dt: f64,
) -> Result<DVector<f64>> {
    check_dims(model, y, dw)?;
    check_finite(y, "input state")?;
    let next = y + model.drift(y, input) * dt + model.dispersion(y) * dw;
    check_finite(&next, "state after Euler–Maruyama step")?;
    Ok(next)
}

/// The individual Itô–Taylor coefficients evaluated at one state.
#[derive(Clone, Debug)]
pub struct Taylor15Terms {
    pub drift: DVector<f64>,
    pub dispersion: DMatrix<f64>,
    /// Column `j` is `Lʲ a`.
    pub lj_drift: DMatrix<f64>,
    pub l0_drift: DVector<f64>,
    /// Column `j` is `Lʲ b_{·j}`.
    pub lj_dispersion: DMatrix<f64>,
    /// Column `j` is `L⁰ b_{·j}`.
    pub l0_dispersion: DMatrix<f64>,
}

pub fn taylor15_terms<M: SdeModel + ?Sized>(model: &M, y: &DVector<f64>, input: &[f64]) -> Taylor15Terms {
    let a = model.drift(y, input);
    let b = model.dispersion(y);
    let bbt = &b * b.transpose();
    let ja = model.drift_jacobian(y, input);
    let lj_drift = &ja * &b;
    let l0_drift = &ja * &a + model.drift_hessian_contraction(y, input, &bbt) * 0.5;
    let (n, m) = b.shape();
    let (lj_dispersion, l0_dispersion) = if model.has_additive_noise() {
        (DMatrix::zeros(n, m), DMatrix::zeros(n, m))
    } else {
        let mut lj = DMatrix::zeros(n, m);
        for j in 0..m {
            let col = b.column(j).into_owned();
            let d = model.dispersion_derivative(y, &col);
            lj.set_column(j, &d.column(j));
        }
        let l0 = model.dispersion_derivative(y, &a) + model.dispersion_hessian_contraction(y, &bbt) * 0.5;
        (lj, l0)
    };
    Taylor15Terms {
        drift: a,
        dispersion: b,
        lj_drift,
        l0_drift,
        lj_dispersion,
        l0_dispersion,
    }
}

impl Taylor15Terms {
    /// Applies the scheme
    /// `y + aΔt + bΔw + ½Lʲb(Δw²−Δt) + LʲaΔz + L⁰b(ΔwΔt−Δz) + ½L⁰aΔt²`.
    pub fn advance(&self, y: &DVector<f64>, inc: &BrownianIncrementPair, dt: f64) -> DVector<f64> {
        let mut next = y + &self.drift * dt + &self.dispersion * &inc.dw + &self.lj_drift * &inc.dz;
        next += &self.l0_drift * (0.5 * dt * dt);
        for j in 0..inc.dw.len() {
            let dw = inc.dw[j];
            let dz = inc.dz[j];
            next += self.lj_dispersion.column(j) * (0.5 * (dw * dw - dt));
            next += self.l0_dispersion.column(j) * (dw * dt - dz);
        }
        next
    }
}

/// One order-1.5 strong Taylor step. The input is held constant over the step.
pub fn taylor15_step<M: SdeModel + ?Sized>(
    model: &M,
    y: &DVector<f64>,
    input: &[f64],
    inc: &BrownianIncrementPair,
    dt: f64,
) -> Result<DVector<f64>> {
    check_dims(model, y, &inc.dw)?;
    check_finite(y, "input state")?;
    let next = taylor15_terms(model, y, input).advance(y, inc, dt);
    check_finite(&next, "state after Taylor 1.5 step")?;
    Ok(next)
}

/// Integrates `model` from `y0` driven by a sampled force series
/// (`forces` row `k` is held over step `k → k+1`). Returns one sample per row
/// of `forces`.
pub fn simulate_forced(
    model: &StateSpaceModel,
    y0: &DVector<f64>,
    forces: &DMatrix<f64>,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let n_samples = forces.nrows();
    if n_samples < 2 {
        return Err(TwinError::invalid("forces", "need at least two samples"));
    }
    if forces.ncols() != model.n_dof() {
        return Err(TwinError::Dimension {
            context: "force series channels",
            expected: model.n_dof(),
            actual: forces.ncols(),
        });
    }
    if y0.len() != model.dim() {
        return Err(TwinError::Dimension {
            context: "initial state",
            expected: model.dim(),
            actual: y0.len(),
        });
    }
    let mut rng = stream_rng(cfg.seed, streams::PROCESS);
    let dim = model.dim();
    let n = model.n_dof();
    let m = model.noise_dim();
    let mut states = DMatrix::zeros(n_samples, dim);
    let mut acc = DMatrix::zeros(n_samples, n);
    let mut y = y0.clone();
    let mut input = vec![0.0; n];
    for k in 0..n_samples {
        states.set_row(k, &y.transpose());
        let a = model.restoring_acceleration(y.as_slice());
        for (i, v) in a.into_iter().enumerate() {
            acc[(k, i)] = v;
        }
        if k + 1 == n_samples {
            break;
        }
        for (i, u) in input.iter_mut().enumerate() {
            *u = forces[(k, i)];
        }
        let inc = BrownianIncrementPair::sample(&mut rng, cfg.dt, m);
        y = match cfg.scheme {
            Scheme::EulerMaruyama => em_step(model, &y, &input, &inc.dw, cfg.dt),
            Scheme::Taylor15 => taylor15_step(model, &y, &input, &inc, cfg.dt),
        }
        .map_err(|e| TwinError::Numeric(format!("step {k}: {e}")))?;
    }
    let times = (0..n_samples).map(|k| k as f64 * cfg.dt).collect();
    Ok(Trajectory {
        times,
        labels: model.labels().iter().map(|l| l.to_string()).collect(),
        states,
        accelerations: acc,
        forces: forces.clone(),
    })
}

/// Number of grid samples covering `[0, duration]` at step `dt`.
pub fn grid_len(duration: f64, dt: f64) -> Result<usize> {
    if !(duration >= dt) || !duration.is_finite() {
        return Err(TwinError::invalid(
            "duration",
            format!("must be at least one step (dt = {dt}), got {duration}"),
        ));
    }
    Ok((duration / dt).round() as usize + 1)
}

/// Clean harmonic force series of `system` on the grid `k·dt`.
pub fn harmonic_forces(system: &crate::model::MdofSystem, n_samples: usize, dt: f64) -> DMatrix<f64> {
    let mut f = DMatrix::zeros(n_samples, system.n_dof());
    for k in 0..n_samples {
        f.set_row(k, &system.force_at(k as f64 * dt).transpose());
    }
    f
}

/// Simulates one fast-time window of length `duration` with the system's
/// clean harmonic force.
pub fn simulate_window(
    model: &StateSpaceModel,
    y0: &DVector<f64>,
    duration: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let n = grid_len(duration, cfg.dt)?;
    let forces = harmonic_forces(model.system(), n, cfg.dt);
    simulate_forced(model, y0, &forces, cfg)
}
