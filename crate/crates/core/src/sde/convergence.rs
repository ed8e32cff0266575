//! Strong-convergence study on shared Brownian paths.

use nalgebra::{DMatrix, DVector};

use super::{em_step, taylor15_step, BrownianIncrementPair, SdeModel};
use crate::error::Result;
use crate::rng::stream_rng;

/// Scalar Ornstein–Uhlenbeck process `dy = −θ y dt + σ dW`.
#[derive(Clone, Copy, Debug)]
pub struct OrnsteinUhlenbeck {
    pub theta: f64,
    pub sigma: f64,
}

impl SdeModel for OrnsteinUhlenbeck {
    fn dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn drift(&self, y: &DVector<f64>, _input: &[f64]) -> DVector<f64> {
        y * -self.theta
    }

    fn dispersion(&self, _y: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.sigma)
    }

    fn drift_jacobian(&self, _y: &DVector<f64>, _input: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, -self.theta)
    }

    fn drift_hessian_contraction(&self, _y: &DVector<f64>, _input: &[f64], _w: &DMatrix<f64>) -> DVector<f64> {
        DVector::zeros(1)
    }

    fn has_additive_noise(&self) -> bool {
        true
    }
}

/// Mean absolute terminal error of each scheme at one coarse step size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrongErrorPoint {
    pub dt: f64,
    pub euler_maruyama: f64,
    pub taylor15: f64,
}

/// Strong errors at time `horizon` for each coarse `dt` against a Taylor 1.5
/// reference at `dt_ref`, all driven by the same fine Brownian path (coarse
/// increments are exact aggregates of the fine ones).
pub fn strong_error_study<M: SdeModel>(
    model: &M,
    y0: &DVector<f64>,
    horizon: f64,
    dts: &[f64],
    dt_ref: f64,
    paths: usize,
    seed: u64,
) -> Result<Vec<StrongErrorPoint>> {
    let n_ref = (horizon / dt_ref).round() as usize;
    let ratios: Vec<usize> = dts.iter().map(|dt| (dt / dt_ref).round() as usize).collect();
    let mut em_err = vec![0.0; dts.len()];
    let mut t15_err = vec![0.0; dts.len()];
    let mut rng = stream_rng(seed, 0);
    let m = model.noise_dim();
    let input: [f64; 0] = [];
    for _ in 0..paths {
        let fine: Vec<BrownianIncrementPair> =
            (0..n_ref).map(|_| BrownianIncrementPair::sample(&mut rng, dt_ref, m)).collect();
        let mut reference = y0.clone();
        for inc in &fine {
            reference = taylor15_step(model, &reference, &input, inc, dt_ref)?;
        }
        for (i, (&dt, &r)) in dts.iter().zip(&ratios).enumerate() {
            let mut y_em = y0.clone();
            let mut y_t = y0.clone();
            for chunk in fine.chunks(r) {
                let inc = BrownianIncrementPair::aggregate(chunk, dt_ref);
                y_em = em_step(model, &y_em, &input, &inc.dw, dt)?;
                y_t = taylor15_step(model, &y_t, &input, &inc, dt)?;
            }
            em_err[i] += (&y_em - &reference).norm();
            t15_err[i] += (&y_t - &reference).norm();
        }
    }
    Ok(dts
        .iter()
        .enumerate()
        .map(|(i, &dt)| StrongErrorPoint {
            dt,
            euler_maruyama: em_err[i] / paths as f64,
            taylor15: t15_err[i] / paths as f64,
        })
        .collect())
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
