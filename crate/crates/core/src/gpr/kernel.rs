use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    #[default]
    SquaredExponential,
    Matern52,
}

/// Stationary 1-D covariance function `κ(r; σ², ℓ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub family: KernelFamily,
    pub variance: f64,
    pub lengthscale: f64,
}

const SQRT5: f64 = 2.236_067_977_499_79;

impl Kernel {
    pub fn eval(&self, a: f64, b: f64) -> f64 {
        let r = (a - b).abs() / self.lengthscale;
        match self.family {
            KernelFamily::SquaredExponential => self.variance * (-0.5 * r * r).exp(),
            KernelFamily::Matern52 => {
                let s = SQRT5 * r;
                self.variance * (1.0 + s + s * s / 3.0) * (-s).exp()
            }
        }
    }

    /// `∂κ/∂ log ℓ`.
    pub fn d_log_lengthscale(&self, a: f64, b: f64) -> f64 {
        let r = (a - b).abs() / self.lengthscale;
        match self.family {
            KernelFamily::SquaredExponential => self.variance * r * r * (-0.5 * r * r).exp(),
            KernelFamily::Matern52 => {
                let s = SQRT5 * r;
                self.variance * (s * s / 3.0) * (1.0 + s) * (-s).exp()
            }
        }
    }

    pub fn gram(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(x.len(), x.len(), |i, j| self.eval(x[i], x[j]))
    }

    /// Row `i` is `κ(xs[i], x[·])`.
    pub fn cross(&self, xs: &[f64], x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(xs.len(), x.len(), |i, j| self.eval(xs[i], x[j]))
    }

    pub fn gram_d_log_lengthscale(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(x.len(), x.len(), |i, j| self.d_log_lengthscale(x[i], x[j]))
    }
}
