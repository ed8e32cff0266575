//! Accumulated twin state and window assimilation.

use std::fs;
use std::io::Write;
use std::path::Path;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use super::campaign::CampaignConfig;
use super::window::{MeasurementWindow, Provenance};
use crate::error::{Result, TwinError};
use crate::gpr::{track_parameters, ParameterSeries, TrackedParameter};
use crate::model::{to_state_space, MdofSystem, StateSpaceModel};
use crate::ukf::{initial_belief, run_filter, RepairLog};

/// Current snapshot format.
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum WindowStatus {
    Accepted,
    Rejected { reason: String },
}

/// Outcome of filtering one window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub t_s: f64,
    pub provenance: Provenance,
    pub status: WindowStatus,
    /// Terminal parameter means, ordered like `TwinSnapshot::parameters`.
    /// Empty for rejected windows.
    pub estimates: Vec<f64>,
    pub std_devs: Vec<f64>,
    /// Prior mean the filter started from.
    pub initial_guess: Vec<f64>,
    pub samples: usize,
    pub repairs: RepairLog,
}

impl WindowRecord {
    pub fn is_accepted(&self) -> bool {
        self.status == WindowStatus::Accepted
    }

    /// Ground-truth stiffness for synthetic windows.
    pub fn true_stiffness(&self) -> Option<&[f64]> {
        match &self.provenance {
            Provenance::Synthetic { true_stiffness, .. } => Some(true_stiffness),
            Provenance::Ingested { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwinSnapshot {
    pub version: u32,
    pub system: MdofSystem,
    pub config: CampaignConfig,
    /// Augmented stiffness indices.
    pub parameters: Vec<usize>,
    pub windows_processed: usize,
    pub history: Vec<WindowRecord>,
    pub gp_models: Vec<TrackedParameter>,
    /// Message of the last failed GP refresh, if the models are stale.
    pub gp_error: Option<String>,
}

impl TwinSnapshot {
    pub fn new(system: MdofSystem, config: CampaignConfig) -> Result<Self> {
        config.validate(&system)?;
        let parameters = config.augmented(&system);
        Ok(Self {
            version: SNAPSHOT_VERSION,
            system,
            config,
            parameters,
            windows_processed: 0,
            history: Vec::new(),
            gp_models: Vec::new(),
            gp_error: None,
        })
    }

    pub fn model(&self) -> Result<StateSpaceModel> {
        to_state_space(&self.system, &self.parameters)
    }

    pub fn accepted(&self) -> impl Iterator<Item = &WindowRecord> {
        self.history.iter().filter(|r| r.is_accepted())
    }

    pub fn last_t_s(&self) -> Option<f64> {
        self.history.last().map(|r| r.t_s)
    }

    /// Parameters that get a GP: augmented and not frozen.
    pub fn tracked_parameters(&self) -> Vec<usize> {
        let frozen = self.system.frozen_indices();
        self.parameters.iter().copied().filter(|p| !frozen.contains(p)).collect()
    }

    fn is_frozen(&self, p: usize) -> bool {
        self.system.frozen_indices().contains(&p)
    }

    /// Starting guess for the next window: the last accepted terminal
    /// estimate, or the configured first guess. Frozen parameters always
    /// start at nominal.
    pub fn next_guess(&self) -> Vec<f64> {
        let nominal = self.system.stiffnesses();
        let last = self.accepted().last();
        self.parameters
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                if self.is_frozen(p) {
                    nominal[p]
                } else if let Some(r) = last {
                    r.estimates[j]
                } else if let Some(g) = &self.config.initial_guess {
                    g[j]
                } else {
                    self.config.initial_guess_factor * nominal[p]
                }
            })
            .collect()
    }

    fn filter_window(&self, window: &MeasurementWindow) -> Result<WindowRecord> {
        let model = self.model()?;
        let guess = self.next_guess();
        let mut init_cfg = self.config.filter.initial.clone();
        if init_cfg.parameter_std.is_empty() {
            let nominal = self.system.stiffnesses();
            init_cfg.parameter_std = self
                .parameters
                .iter()
                .map(|&p| {
                    self.is_frozen(p)
                        .then(|| self.config.frozen_prior_relative_std * nominal[p])
                })
                .collect();
        }
        let init = initial_belief(&model, &guess, &init_cfg)?;
        let mut record = WindowRecord {
            t_s: window.t_s,
            provenance: window.provenance.clone(),
            status: WindowStatus::Accepted,
            estimates: Vec::new(),
            std_devs: Vec::new(),
            initial_guess: guess,
            samples: window.len(),
            repairs: RepairLog::default(),
        };
        match run_filter(&model, window, &init, &self.config.filter) {
            Ok(run) => {
                record.estimates = run.terminal_parameters();
                record.std_devs = run.terminal_parameter_std_devs();
                record.repairs = run.repairs;
                if record.estimates.iter().chain(&record.std_devs).any(|v| !v.is_finite()) {
                    record.status = WindowStatus::Rejected {
                        reason: "non-finite terminal estimate".into(),
                    };
                    record.estimates.clear();
                    record.std_devs.clear();
                }
            }
            Err(e) if e.is_numeric() => {
                warn!("window at t_s = {} rejected: {e}", window.t_s);
                record.status = WindowStatus::Rejected { reason: e.to_string() };
            }
            Err(e) => return Err(e),
        }
        Ok(record)
    }

    fn check_window(&self, window: &MeasurementWindow) -> Result<()> {
        if !(window.t_s >= 0.0) || !window.t_s.is_finite() {
            return Err(TwinError::NegativeTime(window.t_s));
        }
        if let Some(last) = self.last_t_s() {
            if !(window.t_s > last) {
                return Err(TwinError::OutOfOrder { t_s: window.t_s, last });
            }
        }
        window.validate()?;
        if window.force.ncols() != self.system.n_dof() {
            return Err(TwinError::Dimension {
                context: "window force channels",
                expected: self.system.n_dof(),
                actual: window.force.ncols(),
            });
        }
        Ok(())
    }

    fn push_window(&mut self, window: &MeasurementWindow) -> Result<()> {
        self.check_window(window)?;
        let record = self.filter_window(window)?;
        if record.is_accepted() {
            info!(
                "t_s = {}: estimates {:?}",
                record.t_s,
                record.estimates.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()
            );
        }
        self.history.push(record);
        self.windows_processed += 1;
        Ok(())
    }

    /// Filters one window, appends its record and refreshes the GP models.
    /// Numeric filter failures mark the window rejected; the snapshot still
    /// advances. Out-of-order or malformed windows leave it untouched.
    pub fn assimilate(&mut self, window: &MeasurementWindow) -> Result<()> {
        self.push_window(window)?;
        self.refresh_models();
        Ok(())
    }

    /// Filters a sequence of windows and refreshes the GP models once at the
    /// end. The history matches one-by-one assimilation.
    pub fn assimilate_all(&mut self, windows: &[MeasurementWindow]) -> Result<()> {
        for w in windows {
            self.push_window(w)?;
        }
        self.refresh_models();
        Ok(())
    }

    /// Per-parameter training series: accepted windows up to the cutoff.
    pub fn training_series(&self) -> Vec<ParameterSeries> {
        let cutoff = self.config.cutoff_days.unwrap_or(f64::INFINITY);
        let rows: Vec<&WindowRecord> = self.accepted().filter(|r| r.t_s <= cutoff).collect();
        self.parameters
            .iter()
            .enumerate()
            .filter(|(_, &p)| !self.is_frozen(p))
            .map(|(j, &p)| ParameterSeries {
                index: p,
                t_s: rows.iter().map(|r| r.t_s).collect(),
                values: rows.iter().map(|r| r.estimates[j]).collect(),
                std_devs: Some(rows.iter().map(|r| r.std_devs[j]).collect()),
            })
            .collect()
    }

    /// Retrains every GP from scratch. A failed fit keeps the previous
    /// models and records the error.
    pub fn refresh_models(&mut self) {
        let series = self.training_series();
        if series.is_empty() || series[0].t_s.len() < self.config.min_gp_points {
            return;
        }
        if self.gp_models.iter().map(|m| m.model.inputs().len()).next() == Some(series[0].t_s.len())
            && self.gp_error.is_none()
            && self.gp_models.len() == series.len()
        {
            debug!("GP training set unchanged; skipping refresh");
            return;
        }
        match track_parameters(&series, &self.config.gp) {
            Ok(models) => {
                self.gp_models = models;
                self.gp_error = None;
            }
            Err(e) => {
                warn!("GP refresh failed: {e}");
                self.gp_error = Some(e.to_string());
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: TwinSnapshot = serde_json::from_str(text)?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(TwinError::Format(format!(
                "unsupported snapshot version {} (expected {SNAPSHOT_VERSION})",
                snap.version
            )));
        }
        if snap.history.len() != snap.windows_processed {
            return Err(TwinError::Format(format!(
                "snapshot lists {} windows but windows_processed = {}",
                snap.history.len(),
                snap.windows_processed
            )));
        }
        Ok(snap)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Columns `t_s, k<i>, sd<i>, …` for every accepted window, parameters
    /// numbered from 1.
    pub fn write_estimates_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t_s".to_string()];
        for &p in &self.parameters {
            header.push(format!("k{}", p + 1));
            header.push(format!("sd{}", p + 1));
        }
        w.write_record(&header)?;
        for r in self.accepted() {
            let mut row = vec![r.t_s.to_string()];
            for (v, s) in r.estimates.iter().zip(&r.std_devs) {
                row.push(v.to_string());
                row.push(s.to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Functional form of [`TwinSnapshot::assimilate`].
pub fn assimilate_window(snapshot: &TwinSnapshot, window: &MeasurementWindow) -> Result<TwinSnapshot> {
    let mut next = snapshot.clone();
    next.assimilate(window)?;
    Ok(next)
}
