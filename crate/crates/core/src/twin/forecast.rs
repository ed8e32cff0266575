//! Parameter forecasts and forward simulation at forecast parameters.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::snapshot::TwinSnapshot;
use crate::error::{Result, TwinError};
use crate::gpr::GpPrediction;
use crate::model::to_state_space;
use crate::rng::{stream_rng, streams};
use crate::sde::{simulate_window, IntegratorConfig, Scheme, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterForecast {
    /// Stiffness index.
    pub index: usize,
    pub prediction: GpPrediction,
}

/// GP predictions for every tracked parameter at `future_ts` (days).
pub fn predict_parameters(snapshot: &TwinSnapshot, future_ts: &[f64]) -> Result<Vec<ParameterForecast>> {
    if snapshot.gp_models.is_empty() {
        return Err(TwinError::Untrained);
    }
    if let Some(&t) = future_ts.iter().find(|t| !t.is_finite()) {
        return Err(TwinError::invalid("future_ts", format!("non-finite query {t}")));
    }
    Ok(snapshot
        .gp_models
        .iter()
        .map(|m| ParameterForecast {
            index: m.index,
            prediction: m.model.predict(future_ts),
        })
        .collect())
}

/// Columns `t_s` then `k<i>_mean, k<i>_sd, k<i>_lower95, k<i>_upper95` per
/// forecast.
pub fn write_track_csv<W: Write>(forecasts: &[ParameterForecast], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t_s".to_string()];
    for f in forecasts {
        for s in ["mean", "sd", "lower95", "upper95"] {
            header.push(format!("k{}_{s}", f.index + 1));
        }
    }
    w.write_record(&header)?;
    let n = forecasts.first().map_or(0, |f| f.prediction.inputs.len());
    let cols: Vec<_> = forecasts
        .iter()
        .map(|f| (f.prediction.std_dev(), f.prediction.band()))
        .collect();
    for i in 0..n {
        let mut row = vec![forecasts[0].prediction.inputs[i].to_string()];
        for (f, (sd, (lo, hi))) in forecasts.iter().zip(&cols) {
            row.push(f.prediction.mean[i].to_string());
            row.push(sd[i].to_string());
            row.push(lo[i].to_string());
            row.push(hi[i].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Full stiffness vector at `t_s`: GP mean and standard deviation for
/// tracked parameters, nominal value and zero spread otherwise.
pub fn forecast_stiffness(snapshot: &TwinSnapshot, t_s: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let forecasts = predict_parameters(snapshot, &[t_s])?;
    let mut mean = snapshot.system.stiffnesses().to_vec();
    let mut sd = vec![0.0; mean.len()];
    for f in forecasts {
        mean[f.index] = f.prediction.mean[0];
        sd[f.index] = f.prediction.variance[0].sqrt();
    }
    if let Some(k) = mean.iter().find(|k| !(**k > 0.0)) {
        return Err(TwinError::Numeric(format!("forecast stiffness {k} is not positive")));
    }
    Ok((mean, sd))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseConfig {
    /// Seconds.
    pub duration: f64,
    pub seed: u64,
    /// Number of parameter draws; zero disables the ensemble.
    pub ensemble: usize,
}

impl Default for ResponseConfig {
    fn default() -> Self {
        Self {
            duration: 5.0,
            seed: 0,
            ensemble: 0,
        }
    }
}

/// Per-time statistics of an ensemble, one column per state entry.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    pub members: usize,
    pub mean: DMatrix<f64>,
    pub std_dev: DMatrix<f64>,
    pub q05: DMatrix<f64>,
    pub q50: DMatrix<f64>,
    pub q95: DMatrix<f64>,
}

impl EnsembleSummary {
    /// Columns `time` then `<label>_mean, _sd, _q05, _q50, _q95` per state.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string()];
        for l in &self.labels {
            for s in ["mean", "sd", "q05", "q50", "q95"] {
                header.push(format!("{l}_{s}"));
            }
        }
        w.write_record(&header)?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![t.to_string()];
            for j in 0..self.labels.len() {
                for m in [&self.mean, &self.std_dev, &self.q05, &self.q50, &self.q95] {
                    row.push(m[(k, j)].to_string());
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResponseForecast {
    pub t_s: f64,
    pub stiffness: Vec<f64>,
    pub stiffness_std: Vec<f64>,
    /// Response at the GP-mean stiffness.
    pub trajectory: Trajectory,
    pub ensemble: Option<EnsembleSummary>,
}

fn simulate_at(snapshot: &TwinSnapshot, k: &[f64], cfg: &ResponseConfig) -> Result<Trajectory> {
    let sys = snapshot.system.with_stiffnesses(k)?;
    let model = to_state_space(&sys, &[])?;
    let integ = IntegratorConfig {
        dt: snapshot.config.dt,
        scheme: Scheme::Taylor15,
        seed: cfg.seed,
    };
    simulate_window(&model, &DVector::zeros(2 * sys.n_dof()), cfg.duration, &integ)
}

/// Linear-interpolated sample quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize(times: Vec<f64>, labels: Vec<String>, runs: &[Trajectory]) -> EnsembleSummary {
    let (n, d) = runs[0].states.shape();
    let m = runs.len();
    let mut out = EnsembleSummary {
        times,
        labels,
        members: m,
        mean: DMatrix::zeros(n, d),
        std_dev: DMatrix::zeros(n, d),
        q05: DMatrix::zeros(n, d),
        q50: DMatrix::zeros(n, d),
        q95: DMatrix::zeros(n, d),
    };
    let mut buf = vec![0.0; m];
    for k in 0..n {
        for j in 0..d {
            for (b, r) in buf.iter_mut().zip(runs) {
                *b = r.states[(k, j)];
            }
            let mean = buf.iter().sum::<f64>() / m as f64;
            let var = if m > 1 {
                buf.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64
            } else {
                0.0
            };
            buf.sort_by(f64::total_cmp);
            out.mean[(k, j)] = mean;
            out.std_dev[(k, j)] = var.sqrt();
            out.q05[(k, j)] = quantile(&buf, 0.05);
            out.q50[(k, j)] = quantile(&buf, 0.5);
            out.q95[(k, j)] = quantile(&buf, 0.95);
        }
    }
    out
}

/// Taylor 1.5 simulation of the system at the forecast stiffness, starting
/// at rest under the clean harmonic force. Ensemble members draw each tracked
/// stiffness independently from its GP marginal and share the process-noise
/// path of `cfg.seed`, so their spread reflects parameter uncertainty only.
pub fn predict_response(snapshot: &TwinSnapshot, t_s: f64, cfg: &ResponseConfig) -> Result<ResponseForecast> {
    let (mean, sd) = forecast_stiffness(snapshot, t_s)?;
    let trajectory = simulate_at(snapshot, &mean, cfg)?;
    let ensemble = if cfg.ensemble > 0 {
        let mut rng = stream_rng(cfg.seed, streams::ENSEMBLE);
        let draws: Vec<Vec<f64>> = (0..cfg.ensemble)
            .map(|_| {
                mean.iter()
                    .zip(&sd)
                    .map(|(&m, &s)| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        m + s * z
                    })
                    .collect()
            })
            .collect();
        let runs = draws
            .par_iter()
            .map(|k| {
                if let Some(v) = k.iter().find(|v| !(**v > 0.0)) {
                    return Err(TwinError::Numeric(format!("ensemble drew non-positive stiffness {v}")));
                }
                simulate_at(snapshot, k, cfg)
            })
            .collect::<Result<Vec<_>>>()?;
        Some(summarize(trajectory.times.clone(), trajectory.labels.clone(), &runs))
    } else {
        None
    };
    Ok(ResponseForecast {
        t_s,
        stiffness: mean,
        stiffness_std: sd,
        trajectory,
        ensemble,
    })
}
