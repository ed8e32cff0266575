//! Accuracy summary of a snapshot.

use serde::{Deserialize, Serialize};

use super::snapshot::{TwinSnapshot, WindowStatus};
use crate::error::Result;
use crate::model::{degraded_stiffness, DegradationSchedule};
use crate::ukf::RepairLog;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterAccuracy {
    pub label: String,
    pub index: usize,
    pub estimate: f64,
    pub std_dev: f64,
    pub truth: Option<f64>,
    pub relative_error: Option<f64>,
    /// `100 (1 − |relative error|)`.
    pub accuracy_percent: Option<f64>,
}

/// GP forecast against ground truth at a window past the cutoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeldOutError {
    pub label: String,
    pub index: usize,
    pub t_s: f64,
    pub predicted: f64,
    pub truth: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectedWindow {
    pub t_s: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwinReport {
    pub windows_processed: usize,
    pub windows_accepted: usize,
    pub rejected: Vec<RejectedWindow>,
    pub last_t_s: Option<f64>,
    /// Terminal estimates of the last accepted window.
    pub parameters: Vec<ParameterAccuracy>,
    pub cutoff_days: Option<f64>,
    pub held_out: Vec<HeldOutError>,
    pub max_held_out_error: Option<f64>,
    pub gp_trained: bool,
    pub gp_error: Option<String>,
    pub filter_samples: usize,
    pub jitter_events: usize,
    pub psd_repairs: usize,
    pub max_relative_repair: f64,
}

impl TwinReport {
    pub fn from_snapshot(snapshot: &TwinSnapshot) -> Result<Self> {
        let rejected = snapshot
            .history
            .iter()
            .filter_map(|r| match &r.status {
                WindowStatus::Rejected { reason } => Some(RejectedWindow {
                    t_s: r.t_s,
                    reason: reason.clone(),
                }),
                WindowStatus::Accepted => None,
            })
            .collect();
        let mut repairs = RepairLog::default();
        for r in &snapshot.history {
            repairs.jitter_events += r.repairs.jitter_events;
            repairs.psd_repairs += r.repairs.psd_repairs;
            repairs.max_relative_repair = repairs.max_relative_repair.max(r.repairs.max_relative_repair);
        }
        let parameters = match snapshot.accepted().last() {
            Some(last) => snapshot
                .parameters
                .iter()
                .enumerate()
                .map(|(j, &p)| {
                    let truth = last.true_stiffness().map(|k| k[p]);
                    let rel = truth.map(|t| (last.estimates[j] - t) / t);
                    ParameterAccuracy {
                        label: format!("k{}", p + 1),
                        index: p,
                        estimate: last.estimates[j],
                        std_dev: last.std_devs[j],
                        truth,
                        relative_error: rel,
                        accuracy_percent: rel.map(|e| 100.0 * (1.0 - e.abs())),
                    }
                })
                .collect(),
            None => Vec::new(),
        };
        let held_out = held_out_errors(snapshot)?;
        let max_held_out_error = held_out
            .iter()
            .map(|h| h.relative_error.abs())
            .fold(None, |a: Option<f64>, e| Some(a.map_or(e, |a| a.max(e))));
        Ok(Self {
            windows_processed: snapshot.windows_processed,
            windows_accepted: snapshot.accepted().count(),
            rejected,
            last_t_s: snapshot.last_t_s(),
            parameters,
            cutoff_days: snapshot.config.cutoff_days,
            held_out,
            max_held_out_error,
            gp_trained: !snapshot.gp_models.is_empty(),
            gp_error: snapshot.gp_error.clone(),
            filter_samples: snapshot.history.iter().map(|r| r.samples).sum(),
            jitter_events: repairs.jitter_events,
            psd_repairs: repairs.psd_repairs,
            max_relative_repair: repairs.max_relative_repair,
        })
    }

    /// Plain-text table for terminals.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if self.windows_processed == 0 {
            s.push_str("no windows processed\n");
            return s;
        }
        s.push_str(&format!(
            "windows processed: {} (accepted {}, rejected {})\n",
            self.windows_processed,
            self.windows_accepted,
            self.rejected.len()
        ));
        if let Some(t) = self.last_t_s {
            s.push_str(&format!("last window: t_s = {t} days\n"));
        }
        for r in &self.rejected {
            s.push_str(&format!("  rejected t_s = {}: {}\n", r.t_s, r.reason));
        }
        if !self.parameters.is_empty() {
            s.push_str(&format!(
                "\n{:<6} {:>12} {:>10} {:>12} {:>10} {:>10}\n",
                "param", "estimate", "sd", "truth", "rel.err", "accuracy"
            ));
            for p in &self.parameters {
                let opt = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |v| format!("{v:.prec$}"));
                s.push_str(&format!(
                    "{:<6} {:>12.4} {:>10.4} {:>12} {:>10} {:>10}\n",
                    p.label,
                    p.estimate,
                    p.std_dev,
                    opt(p.truth, 4),
                    opt(p.relative_error.map(|e| 100.0 * e), 3),
                    opt(p.accuracy_percent, 2),
                ));
            }
        }
        if !self.held_out.is_empty() {
            s.push_str(&format!(
                "\nGP forecasts past cutoff ({} days):\n{:<6} {:>8} {:>12} {:>12} {:>10}\n",
                self.cutoff_days.unwrap_or(f64::NAN),
                "param",
                "t_s",
                "predicted",
                "truth",
                "rel.err%"
            ));
            for h in &self.held_out {
                s.push_str(&format!(
                    "{:<6} {:>8} {:>12.4} {:>12.4} {:>10.3}\n",
                    h.label,
                    h.t_s,
                    h.predicted,
                    h.truth,
                    100.0 * h.relative_error
                ));
            }
        }
        if let Some(e) = &self.gp_error {
            s.push_str(&format!("\nGP refresh failed: {e}\n"));
        } else if !self.gp_trained {
            s.push_str("\nGP models not trained\n");
        }
        s.push_str(&format!(
            "\nfilter samples: {}; jitter events: {}; PSD repairs: {} (max relative {:.3e})\n",
            self.filter_samples, self.jitter_events, self.psd_repairs, self.max_relative_repair
        ));
        s
    }
}

/// Errors of the GP mean at every synthetic window past the cutoff, for
/// tracked parameters.
fn held_out_errors(snapshot: &TwinSnapshot) -> Result<Vec<HeldOutError>> {
    let Some(cutoff) = snapshot.config.cutoff_days else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for tracked in &snapshot.gp_models {
        for r in snapshot.history.iter().filter(|r| r.t_s > cutoff) {
            let Some(truth) = r.true_stiffness() else { continue };
            let truth = truth[tracked.index];
            let predicted = tracked.model.predict(&[r.t_s]).mean[0];
            out.push(HeldOutError {
                label: format!("k{}", tracked.index + 1),
                index: tracked.index,
                t_s: r.t_s,
                predicted,
                truth,
                relative_error: (predicted - truth) / truth,
            });
        }
    }
    Ok(out)
}

/// Ground truth of a synthetic campaign at `t_s`.
pub fn campaign_truth(snapshot: &TwinSnapshot, t_s: f64) -> Result<Vec<f64>> {
    let schedule: DegradationSchedule = snapshot.config.schedule(&snapshot.system);
    degraded_stiffness(&schedule, t_s)
}
