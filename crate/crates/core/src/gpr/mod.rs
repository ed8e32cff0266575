//! Gaussian-process regression over the slow timescale.
//!
//! Inputs and targets are standardised internally. Hyperparameters
//! `θ = [log ℓ, log σ², log σ_n²]` live in standardised units and are found
//! by minimising the negative log marginal likelihood
//!
//! ```text
//! ½ rᵀK⁻¹r + ½ log|K| + (n/2) log 2π,   K = σ²R(ℓ) + diag(σ_n² + floorᵢ)
//! ```
//!
//! where `r = y − β̂` for the constant-mean model (`β̂` the generalised least
//! squares estimate) and `r = y` for the zero-mean model.

mod kernel;
mod optim;
mod track;

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TwinError};
use crate::rng::{stream_rng, streams};

pub use kernel::{Kernel, KernelFamily};
pub use track::{track_parameters, ParameterSeries, TrackedParameter};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MeanSpec {
    /// Zero mean on the standardised targets.
    Zero,
    /// Unknown constant, estimated by generalised least squares.
    #[default]
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    #[serde(default)]
    pub kernel: KernelFamily,
    #[serde(default)]
    pub mean: MeanSpec,
    /// Number of optimiser starts (Latin hypercube).
    pub restarts: usize,
    /// ε_t: projected-gradient tolerance.
    pub tolerance: f64,
    /// n_max.
    pub max_iterations: usize,
    pub seed: u64,
    /// Range the starting values of ℓ, σ², σ_n² are drawn from.
    pub start_range: [f64; 2],
    pub lengthscale_bounds: [f64; 2],
    pub variance_bounds: [f64; 2],
    pub noise_bounds: [f64; 2],
    /// Fold the supplied per-point standard deviations into fixed noise floors.
    pub use_point_noise: bool,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            kernel: KernelFamily::SquaredExponential,
            mean: MeanSpec::Constant,
            restarts: 5,
            tolerance: 1e-6,
            max_iterations: 500,
            seed: 0,
            start_range: [1e-2, 1e2],
            lengthscale_bounds: [1e-2, 1e2],
            variance_bounds: [1e-3, 1e3],
            noise_bounds: [1e-6, 1e1],
            use_point_noise: true,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(TwinError::invalid("restarts", "need at least one"));
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(TwinError::invalid("tolerance/max_iterations", "must be positive"));
        }
        for (name, b) in [
            ("start_range", self.start_range),
            ("lengthscale_bounds", self.lengthscale_bounds),
            ("variance_bounds", self.variance_bounds),
            ("noise_bounds", self.noise_bounds),
        ] {
            if !(b[0] > 0.0 && b[1] > b[0] && b[1].is_finite()) {
                return Err(TwinError::invalid(name, "need 0 < lower < upper"));
            }
        }
        Ok(())
    }
}

/// Standardised training data.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Fixed per-point noise variances (standardised units).
    floors: Vec<f64>,
    x_shift: f64,
    x_scale: f64,
    y_shift: f64,
    y_scale: f64,
}

fn shift_scale(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    (mean, if sd > 0.0 { sd } else { 1.0 })
}

/// Relative diagonal jitter added to every gram matrix.
const JITTER: f64 = 1e-10;

impl TrainingSet {
    /// `point_std`: optional per-point standard deviations in target units.
    pub fn new(inputs: &[f64], targets: &[f64], point_std: Option<&[f64]>) -> Result<Self> {
        let n = inputs.len();
        if targets.len() != n {
            return Err(TwinError::Dimension {
                context: "GP targets",
                expected: n,
                actual: targets.len(),
            });
        }
        if n < 3 {
            return Err(TwinError::invalid("training data", format!("need at least 3 points, got {n}")));
        }
        if inputs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(TwinError::invalid("training inputs", "must be strictly increasing"));
        }
        if inputs.iter().chain(targets).any(|v| !v.is_finite()) {
            return Err(TwinError::invalid("training data", "must be finite"));
        }
        let (x_shift, x_scale) = shift_scale(inputs);
        let (y_shift, y_scale) = shift_scale(targets);
        let floors = match point_std {
            None => vec![0.0; n],
            Some(s) if s.len() == n => {
                if s.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(TwinError::invalid("point_std", "must be finite and non-negative"));
                }
                s.iter().map(|v| (v / y_scale).powi(2)).collect()
            }
            Some(s) => {
                return Err(TwinError::Dimension {
                    context: "GP point standard deviations",
                    expected: n,
                    actual: s.len(),
                })
            }
        };
        Ok(Self {
            x: inputs.iter().map(|v| (v - x_shift) / x_scale).collect(),
            y: targets.iter().map(|v| (v - y_shift) / y_scale).collect(),
            floors,
            x_shift,
            x_scale,
            y_shift,
            y_scale,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn covariance(&self, kernel: &Kernel, noise: f64) -> DMatrix<f64> {
        let mut k = kernel.gram(&self.x);
        for i in 0..self.len() {
            k[(i, i)] += noise + self.floors[i] + JITTER * kernel.variance;
        }
        k
    }

    /// Negative log marginal likelihood and its gradient with respect to
    /// `[log ℓ, log σ², log σ_n²]` (standardised units).
    pub fn nll(&self, family: KernelFamily, mean: MeanSpec, log_theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        if log_theta.len() != 3 || log_theta.iter().any(|v| !v.is_finite()) {
            return Err(TwinError::invalid("log_theta", "need three finite entries"));
        }
        let kernel = Kernel {
            family,
            lengthscale: log_theta[0].exp(),
            variance: log_theta[1].exp(),
        };
        let noise = log_theta[2].exp();
        let k = self.covariance(&kernel, noise);
        let f = Factor::new(k, &self.y, mean)?;
        let n = self.len() as f64;
        let r = &f.residual;
        let nll = 0.5 * r.dot(&f.alpha) + f.log_det * 0.5 + 0.5 * n * (2.0 * std::f64::consts::PI).ln();
        // ½ tr((K⁻¹ − ααᵀ) ∂K); β̂ is stationary so no extra term
        let kinv = f.chol.inverse();
        let w = &kinv - &f.alpha * f.alpha.transpose();
        let dl = kernel.gram_d_log_lengthscale(&self.x);
        let mut dv = kernel.gram(&self.x);
        for i in 0..self.len() {
            dv[(i, i)] += JITTER * kernel.variance;
        }
        let g = vec![
            0.5 * w.component_mul(&dl).sum(),
            0.5 * w.component_mul(&dv).sum(),
            0.5 * noise * w.trace(),
        ];
        Ok((nll, g))
    }
}

struct Factor {
    chol: Cholesky<f64, nalgebra::Dyn>,
    alpha: DVector<f64>,
    residual: DVector<f64>,
    beta: f64,
    kinv_one: DVector<f64>,
    one_kinv_one: f64,
    log_det: f64,
}

impl Factor {
    fn new(k: DMatrix<f64>, y: &[f64], mean: MeanSpec) -> Result<Self> {
        let n = y.len();
        let chol = Cholesky::new(k).ok_or_else(|| TwinError::Numeric("GP covariance not positive definite".into()))?;
        let y = DVector::from_column_slice(y);
        let ones = DVector::from_element(n, 1.0);
        let kinv_one = chol.solve(&ones);
        let one_kinv_one = ones.dot(&kinv_one);
        let beta = match mean {
            MeanSpec::Zero => 0.0,
            MeanSpec::Constant => kinv_one.dot(&y) / one_kinv_one,
        };
        let residual = y.add_scalar(-beta);
        let alpha = chol.solve(&residual);
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if !log_det.is_finite() || alpha.iter().any(|v| !v.is_finite()) {
            return Err(TwinError::Numeric("non-finite GP factorisation".into()));
        }
        Ok(Self {
            chol,
            alpha,
            residual,
            beta,
            kinv_one,
            one_kinv_one,
            log_det,
        })
    }
}

/// Hyperparameters in physical units (days, target units²).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub lengthscale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct GpDocument {
    family: KernelFamily,
    mean: MeanSpec,
    /// `[log ℓ, log σ², log σ_n²]`, standardised units.
    log_theta: [f64; 3],
    inputs: Vec<f64>,
    targets: Vec<f64>,
    point_std: Option<Vec<f64>>,
    nll: f64,
}

/// Trained GP with its cached factorisation. Serialises to hyperparameters
/// and training data; the cache is rebuilt on load.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "GpDocument", into = "GpDocument")]
pub struct GpModel {
    doc: GpDocument,
    data: TrainingSet,
    kernel: Kernel,
    factor: std::sync::Arc<Factor>,
}

impl std::fmt::Debug for GpModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GpModel")
            .field("kernel", &self.kernel)
            .field("mean", &self.doc.mean)
            .field("log_theta", &self.doc.log_theta)
            .field("n", &self.data.len())
            .finish()
    }
}

impl PartialEq for GpModel {
    fn eq(&self, other: &Self) -> bool {
        self.doc == other.doc
    }
}

impl TryFrom<GpDocument> for GpModel {
    type Error = TwinError;

    fn try_from(doc: GpDocument) -> Result<Self> {
        let data = TrainingSet::new(&doc.inputs, &doc.targets, doc.point_std.as_deref())?;
        let kernel = Kernel {
            family: doc.family,
            lengthscale: doc.log_theta[0].exp(),
            variance: doc.log_theta[1].exp(),
        };
        let k = data.covariance(&kernel, doc.log_theta[2].exp());
        let factor = Factor::new(k, &data.y, doc.mean)?;
        Ok(Self {
            doc,
            data,
            kernel,
            factor: std::sync::Arc::new(factor),
        })
    }
}

impl From<GpModel> for GpDocument {
    fn from(m: GpModel) -> Self {
        m.doc
    }
}

/// Predictive distribution of the latent function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpPrediction {
    pub inputs: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl GpPrediction {
    pub fn std_dev(&self) -> Vec<f64> {
        self.variance.iter().map(|v| v.sqrt()).collect()
    }

    /// `mean ± 1.96 σ`.
    pub fn band(&self) -> (Vec<f64>, Vec<f64>) {
        self.mean
            .iter()
            .zip(self.std_dev())
            .map(|(m, s)| (m - 1.96 * s, m + 1.96 * s))
            .unzip()
    }

    /// Columns `t_s, mean, stddev, lower95, upper95`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t_s", "mean", "stddev", "lower95", "upper95"])?;
        let sd = self.std_dev();
        let (lo, hi) = self.band();
        for i in 0..self.inputs.len() {
            w.write_record(&[
                self.inputs[i].to_string(),
                self.mean[i].to_string(),
                sd[i].to_string(),
                lo[i].to_string(),
                hi[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl GpModel {
    /// Builds a model with fixed hyperparameters given in physical units.
    /// `noise_variance` may be zero.
    pub fn with_hyperparameters(
        inputs: &[f64],
        targets: &[f64],
        point_std: Option<&[f64]>,
        family: KernelFamily,
        mean: MeanSpec,
        hyper: Hyperparameters,
    ) -> Result<Self> {
        let data = TrainingSet::new(inputs, targets, point_std)?;
        if !(hyper.lengthscale > 0.0) || !(hyper.signal_variance > 0.0) || !(hyper.noise_variance >= 0.0) {
            return Err(TwinError::invalid("hyperparameters", "ℓ, σ² > 0 and σ_n² ≥ 0 required"));
        }
        let s2 = data.y_scale * data.y_scale;
        let noise = (hyper.noise_variance / s2).max(f64::MIN_POSITIVE);
        let log_theta = [
            (hyper.lengthscale / data.x_scale).ln(),
            (hyper.signal_variance / s2).ln(),
            noise.ln(),
        ];
        let nll = data.nll(family, mean, &log_theta)?.0;
        Self::try_from(GpDocument {
            family,
            mean,
            log_theta,
            inputs: inputs.to_vec(),
            targets: targets.to_vec(),
            point_std: point_std.map(<[f64]>::to_vec),
            nll,
        })
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        let s2 = self.data.y_scale * self.data.y_scale;
        Hyperparameters {
            lengthscale: self.kernel.lengthscale * self.data.x_scale,
            signal_variance: self.kernel.variance * s2,
            noise_variance: self.doc.log_theta[2].exp() * s2,
        }
    }

    pub fn log_theta(&self) -> [f64; 3] {
        self.doc.log_theta
    }

    pub fn mean_spec(&self) -> MeanSpec {
        self.doc.mean
    }

    pub fn kernel_family(&self) -> KernelFamily {
        self.doc.family
    }

    pub fn inputs(&self) -> &[f64] {
        &self.doc.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.doc.targets
    }

    pub fn negative_log_likelihood(&self) -> f64 {
        self.doc.nll
    }

    /// Constant mean in target units (the sample mean for the zero-mean model).
    pub fn beta(&self) -> f64 {
        self.data.y_shift + self.factor.beta * self.data.y_scale
    }

    pub fn predict(&self, query: &[f64]) -> GpPrediction {
        let d = &self.data;
        let f = &*self.factor;
        let xs: Vec<f64> = query.iter().map(|v| (v - d.x_shift) / d.x_scale).collect();
        let ks = self.kernel.cross(&xs, &d.x);
        let mean_std = (&ks * &f.alpha).add_scalar(f.beta);
        let v = f.chol.solve(&ks.transpose());
        let mut mean = Vec::with_capacity(xs.len());
        let mut variance = Vec::with_capacity(xs.len());
        for i in 0..xs.len() {
            let ki = ks.row(i);
            let mut s2 = self.kernel.variance - ki.dot(&v.column(i).transpose());
            if self.doc.mean == MeanSpec::Constant {
                let u = 1.0 - ki.dot(&f.kinv_one.transpose());
                s2 += u * u / f.one_kinv_one;
            }
            if s2 < 0.0 {
                if s2 < -1e-8 * self.kernel.variance {
                    log::warn!("negative GP variance {s2:e} clipped at t = {}", query[i]);
                }
                s2 = 0.0;
            }
            mean.push(d.y_shift + d.y_scale * mean_std[i]);
            variance.push(s2 * d.y_scale * d.y_scale);
        }
        GpPrediction {
            inputs: query.to_vec(),
            mean,
            variance,
        }
    }
}

/// Fits hyperparameters by multi-start minimisation of the negative log
/// marginal likelihood.
pub fn train(inputs: &[f64], targets: &[f64], point_std: Option<&[f64]>, cfg: &GpConfig) -> Result<GpModel> {
    cfg.validate()?;
    let point_std = if cfg.use_point_noise { point_std } else { None };
    let data = TrainingSet::new(inputs, targets, point_std)?;
    let lo = [
        cfg.lengthscale_bounds[0].ln(),
        cfg.variance_bounds[0].ln(),
        cfg.noise_bounds[0].ln(),
    ];
    let hi = [
        cfg.lengthscale_bounds[1].ln(),
        cfg.variance_bounds[1].ln(),
        cfg.noise_bounds[1].ln(),
    ];
    let mut rng = stream_rng(cfg.seed, streams::GP_RESTARTS);
    let s = [cfg.start_range[0].ln(); 3];
    let e = [cfg.start_range[1].ln(); 3];
    let starts = optim::latin_hypercube(&mut rng, cfg.restarts, &s, &e);
    let results: Vec<optim::Minimum> = starts
        .par_iter()
        .map(|x0| {
            optim::minimize(
                |th| data.nll(cfg.kernel, cfg.mean, th).ok(),
                x0,
                &lo,
                &hi,
                cfg.tolerance,
                cfg.max_iterations,
            )
        })
        .collect();
    for m in &results {
        log::trace!("restart: θ = {:?}, nll = {}, iters = {}, ε = {:e}, converged = {}", m.x, m.f, m.iterations, m.epsilon, m.converged);
    }
    let best = results
        .iter()
        .filter(|m| m.f.is_finite())
        .min_by(|a, b| a.f.total_cmp(&b.f));
    let best_converged = results
        .iter()
        .filter(|m| m.converged && m.f.is_finite())
        .min_by(|a, b| a.f.total_cmp(&b.f));
    let Some(m) = best_converged else {
        return Err(TwinError::GpTraining {
            best_log_params: best.map(|m| m.x.clone()).unwrap_or_default(),
            best_nll: best.map_or(f64::INFINITY, |m| m.f),
        });
    };
    log::debug!(
        "GP trained: θ = {:?}, nll = {:.6}, {} iterations, ε = {:e}",
        m.x,
        m.f,
        m.iterations,
        m.epsilon
    );
    GpModel::try_from(GpDocument {
        family: cfg.kernel,
        mean: cfg.mean,
        log_theta: [m.x[0], m.x[1], m.x[2]],
        inputs: inputs.to_vec(),
        targets: targets.to_vec(),
        point_std: point_std.map(<[f64]>::to_vec),
        nll: m.f,
    })
}
