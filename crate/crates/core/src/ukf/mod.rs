//! Unscented Kalman filter for joint state–parameter estimation.
//!
//! The filter is written against plain closures `f(y)` and `h(y)` so the
//! same predict/update code serves the linear test oracles and the
//! structural models. [`run_filter`] wires it to a [`StateSpaceModel`] and a
//! measurement window.

mod filter;
mod noise;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TwinError};

pub use filter::{
    initial_belief, run_filter, FilterConfig, FilterRun, FilterSummary, InitialBeliefConfig, ParameterEstimate,
};
pub use noise::{build_process_noise, MeasurementNoise, ProcessNoise, ProcessNoiseConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UkfParams {
    pub alpha_f: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UkfParams {
    fn default() -> Self {
        Self {
            alpha_f: 1e-3,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

impl UkfParams {
    /// `λ = α_f²(L + κ) − L`.
    pub fn lambda(&self, dim: usize) -> f64 {
        let l = dim as f64;
        self.alpha_f * self.alpha_f * (l + self.kappa) - l
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.alpha_f > 0.0 && self.alpha_f <= 1.0) {
            return Err(TwinError::invalid("alpha_f", format!("must lie in (0, 1], got {}", self.alpha_f)));
        }
        if !self.beta.is_finite() || !self.kappa.is_finite() {
            return Err(TwinError::invalid("beta/kappa", "must be finite"));
        }
        if dim == 0 {
            return Err(TwinError::invalid("state dimension", "must be positive"));
        }
        if !(dim as f64 + self.lambda(dim) > 0.0) {
            return Err(TwinError::invalid("kappa", "L + λ must be positive"));
        }
        Ok(())
    }
}

/// Sigma-point weights for a state of length `L`.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    pub mean: DVector<f64>,
    pub cov: DVector<f64>,
    /// `√(L+λ)`.
    pub spread: f64,
}

fn binade_ulp(x: f64) -> f64 {
    let e = ((x.abs().to_bits() >> 52) & 0x7ff) as i32 - 1023;
    2f64.powi(e - 52)
}

/// Computes `W_m`, `W_c`. The off-centre weight is rounded to the grid of
/// the largest partial sum so that `W₀ = 1 − 2L·w` is exact and any
/// summation order of `W_m` gives exactly 1.
pub fn weights(params: &UkfParams, dim: usize) -> Result<Weights> {
    params.validate(dim)?;
    let l = dim as f64;
    // L + λ = α_f²(L + κ), evaluated without the cancellation in λ
    let spread2 = params.alpha_f * params.alpha_f * (l + params.kappa);
    let w = 1.0 / (2.0 * spread2);
    let total = 2.0 * l * w;
    let q = binade_ulp(total.max(1.0)).max(binade_ulp(1.0 - total));
    let wq = (w / q).round() * q;
    let w0 = 1.0 - 2.0 * l * wq;
    let n = 2 * dim + 1;
    let mut mean = DVector::from_element(n, wq);
    mean[0] = w0;
    let mut cov = mean.clone();
    cov[0] = w0 + (1.0 - params.alpha_f * params.alpha_f + params.beta);
    Ok(Weights {
        mean,
        cov,
        spread: spread2.sqrt(),
    })
}

/// Gaussian filtering distribution `N(mean, covariance)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if covariance.shape() != (n, n) {
            return Err(TwinError::Dimension {
                context: "belief covariance",
                expected: n,
                actual: covariance.nrows(),
            });
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(TwinError::Numeric("non-finite belief".into()));
        }
        Ok(Self { mean, covariance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn std_devs(&self) -> DVector<f64> {
        self.covariance.diagonal().map(|v| v.max(0.0).sqrt())
    }
}

/// Counters for the numerical safeguards applied during filtering.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RepairLog {
    /// Square roots that needed diagonal jitter.
    pub jitter_events: usize,
    /// Covariances pushed back to PSD by eigenvalue clipping.
    pub psd_repairs: usize,
    /// Largest clipped mass `Σ|λ⁻|` relative to the trace.
    pub max_relative_repair: f64,
}

#[derive(Clone, Debug)]
pub struct SigmaPointSet {
    /// Column `i` is sigma point `i`; column 0 is the mean.
    pub points: DMatrix<f64>,
    pub w_mean: DVector<f64>,
    pub w_cov: DVector<f64>,
}

impl SigmaPointSet {
    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.ncols() == 0
    }
}

const JITTER_START: f64 = 1e-12;
const JITTER_MAX: f64 = 1e-6;

/// Lower Cholesky factor, retrying with `ε·P_ii` added to the diagonal for
/// `ε = 1e-12, 1e-11, …, 1e-6`.
pub fn robust_cholesky(p: &DMatrix<f64>, log: &mut RepairLog) -> Result<DMatrix<f64>> {
    if let Some(c) = Cholesky::new(p.clone()) {
        return Ok(c.l());
    }
    let n = p.nrows();
    let floor = (p.trace().abs() / n.max(1) as f64).max(f64::MIN_POSITIVE);
    let mut eps = JITTER_START;
    while eps <= JITTER_MAX * 1.0001 {
        let mut pj = p.clone();
        for i in 0..n {
            pj[(i, i)] += eps * p[(i, i)].abs().max(floor * 1e-6);
        }
        if let Some(c) = Cholesky::new(pj) {
            log.jitter_events += 1;
            return Ok(c.l());
        }
        eps *= 10.0;
    }
    Err(TwinError::Numeric(format!(
        "matrix square root failed after jitter up to {JITTER_MAX:e} (dim {n})"
    )))
}

/// Solves `L Lᵀ x = b` given the lower factor `L`.
pub fn cholesky_solve(l: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let y = l
        .solve_lower_triangular(b)
        .ok_or_else(|| TwinError::Numeric("singular triangular factor".into()))?;
    l.transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| TwinError::Numeric("singular triangular factor".into()))
}

pub fn symmetrize(p: &mut DMatrix<f64>) {
    let n = p.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (p[(i, j)] + p[(j, i)]);
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
}

/// Symmetrizes `p` and, if it is not numerically PSD, clips its negative
/// eigenvalues to zero.
pub fn repair_covariance(p: &mut DMatrix<f64>, log: &mut RepairLog) {
    symmetrize(p);
    if Cholesky::new(p.clone()).is_some() {
        return;
    }
    let eig = SymmetricEigen::new(p.clone());
    let trace = p.trace().abs().max(f64::MIN_POSITIVE);
    let negative: f64 = eig.eigenvalues.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
    if negative <= 1e-14 * trace {
        return;
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let mut rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    symmetrize(&mut rebuilt);
    *p = rebuilt;
    log.psd_repairs += 1;
    log.max_relative_repair = log.max_relative_repair.max(negative / trace);
    log::debug!("covariance repaired: clipped {negative:e} (trace {trace:e})");
}

/// `𝒴⁰ = μ`, `𝒴ⁱ = μ ± √(L+λ)·Sᵢ` with `S` the lower Cholesky factor.
pub fn sigma_points(belief: &GaussianBelief, params: &UkfParams, log: &mut RepairLog) -> Result<SigmaPointSet> {
    let l = belief.dim();
    let w = weights(params, l)?;
    let s = robust_cholesky(&belief.covariance, log)?;
    let mut points = DMatrix::zeros(l, 2 * l + 1);
    points.set_column(0, &belief.mean);
    for i in 0..l {
        let d = s.column(i) * w.spread;
        points.set_column(1 + i, &(&belief.mean + &d));
        points.set_column(1 + l + i, &(&belief.mean - &d));
    }
    Ok(SigmaPointSet {
        points,
        w_mean: w.mean,
        w_cov: w.cov,
    })
}

/// Weighted mean computed relative to the central point, which avoids the
/// cancellation between the large negative `W₀` and the outer weights.
fn weighted_mean(y: &DMatrix<f64>, w: &DVector<f64>) -> DVector<f64> {
    let y0 = y.column(0).into_owned();
    let mut acc = DVector::zeros(y.nrows());
    for i in 1..y.ncols() {
        acc += (y.column(i) - &y0) * w[i];
    }
    y0 + acc
}

fn cross_covariance(
    a: &DMatrix<f64>,
    ma: &DVector<f64>,
    b: &DMatrix<f64>,
    mb: &DVector<f64>,
    w: &DVector<f64>,
) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(a.nrows(), b.nrows());
    for i in 0..a.ncols() {
        let da = a.column(i) - ma;
        let db = b.column(i) - mb;
        c.ger(w[i], &da, &db, 1.0);
    }
    c
}

fn propagate<F>(set: &SigmaPointSet, f: F) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut out: Option<DMatrix<f64>> = None;
    for i in 0..set.len() {
        let y = f(&set.points.column(i).into_owned());
        if y.iter().any(|v| !v.is_finite()) {
            return Err(TwinError::NonFiniteSigmaPoint { index: i });
        }
        let m = out.get_or_insert_with(|| DMatrix::zeros(y.len(), set.len()));
        if y.len() != m.nrows() {
            return Err(TwinError::Dimension {
                context: "propagated sigma point",
                expected: m.nrows(),
                actual: y.len(),
            });
        }
        m.set_column(i, &y);
    }
    Ok(out.unwrap_or_else(|| DMatrix::zeros(0, 0)))
}

/// Predict step. `q` receives the predicted mean `m⁻` and returns the
/// process-noise covariance added to `P⁻`.
pub fn predict<F, Q>(
    belief: &GaussianBelief,
    f: F,
    q: Q,
    params: &UkfParams,
    log: &mut RepairLog,
) -> Result<GaussianBelief>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    Q: FnOnce(&DVector<f64>) -> DMatrix<f64>,
{
    let set = sigma_points(belief, params, log)?;
    let y = propagate(&set, f)?;
    if y.nrows() != belief.dim() {
        return Err(TwinError::Dimension {
            context: "dynamic model output",
            expected: belief.dim(),
            actual: y.nrows(),
        });
    }
    let mean = weighted_mean(&y, &set.w_mean);
    let qm = q(&mean);
    if qm.shape() != (mean.len(), mean.len()) {
        return Err(TwinError::Dimension {
            context: "process noise covariance",
            expected: mean.len(),
            actual: qm.nrows(),
        });
    }
    let mut cov = cross_covariance(&y, &mean, &y, &mean, &set.w_cov) + qm;
    repair_covariance(&mut cov, log);
    GaussianBelief::new(mean, cov)
}

/// Update step with measurement `z` and noise covariance `r`.
pub fn update<H>(
    predicted: &GaussianBelief,
    h: H,
    z: &DVector<f64>,
    r: &DMatrix<f64>,
    params: &UkfParams,
    log: &mut RepairLog,
) -> Result<GaussianBelief>
where
    H: Fn(&DVector<f64>) -> DVector<f64>,
{
    if r.shape() != (z.len(), z.len()) {
        return Err(TwinError::Dimension {
            context: "measurement noise covariance",
            expected: z.len(),
            actual: r.nrows(),
        });
    }
    let set = sigma_points(predicted, params, log)?;
    let zs = propagate(&set, h)?;
    if zs.nrows() != z.len() {
        return Err(TwinError::Dimension {
            context: "measurement vector",
            expected: zs.nrows(),
            actual: z.len(),
        });
    }
    let mu = weighted_mean(&zs, &set.w_mean);
    let mut s = cross_covariance(&zs, &mu, &zs, &mu, &set.w_cov) + r;
    symmetrize(&mut s);
    let c = cross_covariance(&set.points, &predicted.mean, &zs, &mu, &set.w_cov);
    let ls = robust_cholesky(&s, log).map_err(|_| TwinError::Numeric("innovation covariance is singular".into()))?;
    // K = C S⁻¹ = (S⁻¹ Cᵀ)ᵀ
    let gain = cholesky_solve(&ls, &c.transpose())?.transpose();
    let mean = &predicted.mean + &gain * (z - &mu);
    let mut cov = &predicted.covariance - &gain * &s * gain.transpose();
    repair_covariance(&mut cov, log);
    GaussianBelief::new(mean, cov)
}
