//! Window-level filtering of acceleration records.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::noise::{build_process_noise, MeasurementNoise, ProcessNoiseConfig};
use super::{predict, update, GaussianBelief, RepairLog, UkfParams};
use crate::error::{Result, TwinError};
use crate::model::{acceleration_model, StateSpaceModel};
use crate::sde::SdeModel;
use crate::twin::MeasurementWindow;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialBeliefConfig {
    /// Prior variance of every displacement and velocity entry.
    pub state_variance: f64,
    /// Prior standard deviation of each parameter as a fraction of its
    /// nominal value.
    pub parameter_relative_std: f64,
    /// Absolute prior standard deviations per augmented parameter; overrides
    /// the relative rule where given (empty = unused).
    #[serde(default)]
    pub parameter_std: Vec<Option<f64>>,
}

impl Default for InitialBeliefConfig {
    fn default() -> Self {
        Self {
            state_variance: 1e-6,
            parameter_relative_std: 0.1,
            parameter_std: Vec::new(),
        }
    }
}

/// Prior at the start of a window: states at `0` with the configured
/// variance, augmented parameters at `guess`.
pub fn initial_belief(model: &StateSpaceModel, guess: &[f64], cfg: &InitialBeliefConfig) -> Result<GaussianBelief> {
    let aug = model.augmented();
    if guess.len() != aug.len() {
        return Err(TwinError::Dimension {
            context: "initial parameter guess",
            expected: aug.len(),
            actual: guess.len(),
        });
    }
    if !(cfg.state_variance > 0.0) || !(cfg.parameter_relative_std > 0.0) {
        return Err(TwinError::invalid("initial belief", "variances must be positive"));
    }
    let n2 = 2 * model.n_dof();
    let dim = model.dim();
    let mut mean = DVector::zeros(dim);
    let mut var = DVector::from_element(dim, cfg.state_variance);
    let nominal = model.system().stiffnesses();
    for (j, (&p, &g)) in aug.iter().zip(guess).enumerate() {
        mean[n2 + j] = g;
        let sd = match cfg.parameter_std.get(j).copied().flatten() {
            Some(sd) if sd > 0.0 => sd,
            Some(_) => return Err(TwinError::invalid("parameter_std", "must be positive")),
            None => cfg.parameter_relative_std * nominal[p],
        };
        var[n2 + j] = sd * sd;
    }
    GaussianBelief::new(mean, DMatrix::from_diagonal(&var))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    #[serde(default)]
    pub ukf: UkfParams,
    #[serde(default)]
    pub process: ProcessNoiseConfig,
    #[serde(default)]
    pub measurement: MeasurementNoise,
    #[serde(default)]
    pub initial: InitialBeliefConfig,
}

/// Per-sample filtering history of one window.
#[derive(Clone, Debug)]
pub struct FilterRun {
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    /// Row `k` is the filtered mean after sample `k`.
    pub means: DMatrix<f64>,
    pub std_devs: DMatrix<f64>,
    pub terminal: GaussianBelief,
    pub repairs: RepairLog,
    /// Stiffness index of each augmented entry.
    pub parameter_indices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterEstimate {
    pub label: String,
    pub index: usize,
    pub value: f64,
    pub std_dev: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub samples: usize,
    pub parameters: Vec<ParameterEstimate>,
    pub terminal_mean: Vec<f64>,
    pub terminal_covariance: Vec<Vec<f64>>,
    pub repairs: RepairLog,
    pub config: FilterConfig,
}

impl FilterRun {
    fn parameter_offset(&self) -> usize {
        self.terminal.dim() - self.parameter_indices.len()
    }

    pub fn terminal_parameters(&self) -> Vec<f64> {
        let o = self.parameter_offset();
        self.terminal.mean.as_slice()[o..].to_vec()
    }

    pub fn terminal_parameter_std_devs(&self) -> Vec<f64> {
        let o = self.parameter_offset();
        self.terminal.std_devs().as_slice()[o..].to_vec()
    }

    /// Columns: `time`, then `<label>_mean,<label>_sd` for each state entry.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string()];
        for l in &self.labels {
            header.push(format!("{l}_mean"));
            header.push(format!("{l}_sd"));
        }
        w.write_record(&header)?;
        let mut row = Vec::with_capacity(header.len());
        for (k, t) in self.times.iter().enumerate() {
            row.clear();
            row.push(t.to_string());
            for j in 0..self.labels.len() {
                row.push(self.means[(k, j)].to_string());
                row.push(self.std_devs[(k, j)].to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self, config: &FilterConfig) -> FilterSummary {
        let o = self.parameter_offset();
        let sd = self.terminal.std_devs();
        let parameters = self
            .parameter_indices
            .iter()
            .enumerate()
            .map(|(j, &index)| ParameterEstimate {
                label: self.labels[o + j].clone(),
                index,
                value: self.terminal.mean[o + j],
                std_dev: sd[o + j],
            })
            .collect();
        let c = &self.terminal.covariance;
        FilterSummary {
            samples: self.times.len(),
            parameters,
            terminal_mean: self.terminal.mean.iter().copied().collect(),
            terminal_covariance: (0..c.nrows()).map(|i| c.row(i).iter().copied().collect()).collect(),
            repairs: self.repairs.clone(),
            config: config.clone(),
        }
    }
}

/// Runs the filter over one window. The transition is the Euler–Maruyama
/// mean step `f(y) = y + a(y, u_{k−1})Δt`; the measurement is the restoring
/// acceleration at the window's observed DOFs. `init` is the belief at the
/// first sample, which is assimilated before any prediction.
pub fn run_filter(
    model: &StateSpaceModel,
    window: &MeasurementWindow,
    init: &GaussianBelief,
    cfg: &FilterConfig,
) -> Result<FilterRun> {
    window.validate()?;
    let dim = model.dim();
    if init.dim() != dim {
        return Err(TwinError::Dimension {
            context: "initial belief",
            expected: dim,
            actual: init.dim(),
        });
    }
    if window.force.ncols() != model.n_dof() {
        return Err(TwinError::Dimension {
            context: "window force channels",
            expected: model.n_dof(),
            actual: window.force.ncols(),
        });
    }
    let dt = window.dt()?;
    let h = acceleration_model(model, &window.observed_dofs)?;
    let q = build_process_noise(model, dt, &cfg.process)?;
    let r = cfg.measurement.covariance(&window.accel)?;
    cfg.ukf.validate(dim)?;

    let n = window.len();
    let mut means = DMatrix::zeros(n, dim);
    let mut sds = DMatrix::zeros(n, dim);
    let mut log = RepairLog::default();
    let mut belief = init.clone();
    let mut input = vec![0.0; model.n_dof()];
    for k in 0..n {
        let mut step = || -> Result<GaussianBelief> {
            let predicted = if k == 0 {
                belief.clone()
            } else {
                predict(
                    &belief,
                    |y| y + model.drift(y, &input) * dt,
                    |m| q.covariance(m),
                    &cfg.ukf,
                    &mut log,
                )?
            };
            let z = window.accel.row(k).transpose();
            update(&predicted, |y| h.evaluate(y), &z, &r, &cfg.ukf, &mut log)
        };
        belief = step().map_err(|e| TwinError::FilterStep {
            sample: k,
            source: Box::new(e),
        })?;
        means.set_row(k, &belief.mean.transpose());
        sds.set_row(k, &belief.std_devs().transpose());
        for (i, u) in input.iter_mut().enumerate() {
            *u = window.force[(k, i)];
        }
    }
    Ok(FilterRun {
        times: window.times.clone(),
        labels: model.labels().iter().map(|l| l.to_string()).collect(),
        means,
        std_devs: sds,
        terminal: belief,
        repairs: log,
        parameter_indices: model.augmented().to_vec(),
    })
}
