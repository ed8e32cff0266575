use std::io::Write;

use nalgebra::DMatrix;

use crate::error::Result;

/// Sampled response of a simulation run. Matrices hold one row per time sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Names of the state columns.
    pub labels: Vec<String>,
    pub states: DMatrix<f64>,
    /// `−M⁻¹(G + Kx + Cẋ)` per DOF.
    pub accelerations: DMatrix<f64>,
    /// Force actually applied over each step.
    pub forces: DMatrix<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["time".to_string()];
        h.extend(self.labels.iter().cloned());
        h.extend((1..=self.accelerations.ncols()).map(|i| format!("a{i}")));
        h.extend((1..=self.forces.ncols()).map(|i| format!("f{i}")));
        h
    }

    /// CSV with columns `time, <states>, a1.., f1..`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        let mut row = Vec::with_capacity(self.header().len());
        for k in 0..self.len() {
            row.clear();
            row.push(self.times[k].to_string());
            row.extend(self.states.row(k).iter().map(|v| v.to_string()));
            row.extend(self.accelerations.row(k).iter().map(|v| v.to_string()));
            row.extend(self.forces.row(k).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
