//! Fast-timescale measurement records.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TwinError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    /// Generated by the campaign simulator. `true_stiffness` is the ground
    /// truth used for the window.
    Synthetic { seed: u64, true_stiffness: Vec<f64> },
    Ingested { path: PathBuf },
}

/// One window of noisy accelerations and forces sampled on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementWindow {
    /// Slow-time stamp, days.
    pub t_s: f64,
    pub times: Vec<f64>,
    /// Rows = samples, columns = observed DOFs.
    pub accel: DMatrix<f64>,
    /// Rows = samples, columns = all DOFs.
    pub force: DMatrix<f64>,
    /// Zero-based.
    pub observed_dofs: Vec<usize>,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    t_s: f64,
    observed_dofs: Vec<usize>,
    n_dof: usize,
    provenance: Provenance,
}

impl MeasurementWindow {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if n < 2 {
            return Err(TwinError::Format("window needs at least two samples".into()));
        }
        if self.accel.nrows() != n || self.force.nrows() != n {
            return Err(TwinError::Dimension {
                context: "window series length",
                expected: n,
                actual: if self.accel.nrows() != n { self.accel.nrows() } else { self.force.nrows() },
            });
        }
        if self.accel.ncols() != self.observed_dofs.len() {
            return Err(TwinError::Dimension {
                context: "acceleration channels",
                expected: self.observed_dofs.len(),
                actual: self.accel.ncols(),
            });
        }
        if !(self.t_s >= 0.0) || !self.t_s.is_finite() {
            return Err(TwinError::NegativeTime(self.t_s));
        }
        Ok(())
    }

    /// Sampling step, checked for uniformity to 1e-9 relative.
    pub fn dt(&self) -> Result<f64> {
        if self.times.len() < 2 {
            return Err(TwinError::Format("window needs at least two samples".into()));
        }
        let dt = (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64;
        if !(dt > 0.0) {
            return Err(TwinError::Format("time grid must be increasing".into()));
        }
        for w in self.times.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
                return Err(TwinError::Format(format!("non-uniform time grid near t = {}", w[0])));
            }
        }
        Ok(dt)
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec!["time".to_string()];
        h.extend(self.observed_dofs.iter().map(|d| format!("a{}", d + 1)));
        h.extend((0..self.force.ncols()).map(|i| format!("f{}", i + 1)));
        h
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        self.validate()?;
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join(format!("{stem}.csv")))?));
        w.write_record(self.header())?;
        let mut row = Vec::new();
        for k in 0..self.len() {
            row.clear();
            row.push(self.times[k].to_string());
            row.extend(self.accel.row(k).iter().map(|v| v.to_string()));
            row.extend(self.force.row(k).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        let side = Sidecar {
            t_s: self.t_s,
            observed_dofs: self.observed_dofs.clone(),
            n_dof: self.force.ncols(),
            provenance: self.provenance.clone(),
        };
        let f = BufWriter::new(File::create(dir.join(format!("{stem}.json")))?);
        serde_json::to_writer_pretty(f, &side)?;
        Ok(())
    }

    /// Reads a window written by [`save`](Self::save) or assembled by hand:
    /// `<stem>.csv` with columns `time, a<i>…, f1…f<n>` and a JSON sidecar.
    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let side: Sidecar = serde_json::from_reader(File::open(dir.join(format!("{stem}.json")))?)?;
        let csv_path = dir.join(format!("{stem}.csv"));
        let mut r = csv::Reader::from_path(&csv_path)?;
        let headers = r.headers()?.clone();
        let p = side.observed_dofs.len();
        let expected = 1 + p + side.n_dof;
        if headers.len() != expected {
            return Err(TwinError::Format(format!(
                "{}: expected {expected} columns, found {}",
                csv_path.display(),
                headers.len()
            )));
        }
        for (j, d) in side.observed_dofs.iter().enumerate() {
            if headers[1 + j] != format!("a{}", d + 1) {
                return Err(TwinError::Format(format!(
                    "column {} is `{}`, expected `a{}`",
                    j + 1,
                    &headers[1 + j],
                    d + 1
                )));
            }
        }
        let mut times = Vec::new();
        let mut data = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| TwinError::Format(format!("`{s}`: {e}"))))
                .collect::<Result<_>>()?;
            times.push(vals[0]);
            data.extend_from_slice(&vals[1..]);
        }
        let n = times.len();
        let all = DMatrix::from_row_slice(n, p + side.n_dof, &data);
        let provenance = match side.provenance {
            Provenance::Ingested { .. } => Provenance::Ingested { path: csv_path },
            other => other,
        };
        let w = Self {
            t_s: side.t_s,
            times,
            accel: all.columns(0, p).into_owned(),
            force: all.columns(p, side.n_dof).into_owned(),
            observed_dofs: side.observed_dofs,
            provenance,
        };
        w.validate()?;
        Ok(w)
    }
}
