//! Itô drift/dispersion form `dy = a(y) dt + b(y) dW` of an [`MdofSystem`],
//! optionally augmented with stiffness parameters as zero-drift states.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::system::{MdofSystem, NoiseScaling, StateLayout};
use crate::error::{Result, TwinError};
use crate::sde::SdeModel;

/// Semantic name of one state entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum StateLabel {
    Displacement(usize),
    Velocity(usize),
    Stiffness(usize),
}

impl std::fmt::Display for StateLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StateLabel::Displacement(i) => write!(f, "x{}", i + 1),
            StateLabel::Velocity(i) => write!(f, "v{}", i + 1),
            StateLabel::Stiffness(i) => write!(f, "k{}", i + 1),
        }
    }
}

#[derive(Clone, Debug)]
pub struct StateSpaceModel {
    system: MdofSystem,
    augmented: Vec<usize>,
    /// `param_slot[i]` is the state index of stiffness `i` when augmented.
    param_slot: Vec<Option<usize>>,
    labels: Vec<StateLabel>,
}

/// Builds the drift/dispersion model; `augment_params` lists stiffness
/// indices appended to the state (in the given order).
pub fn to_state_space(system: &MdofSystem, augment_params: &[usize]) -> Result<StateSpaceModel> {
    let n = system.n_dof();
    let mut param_slot = vec![None; n];
    for (j, &p) in augment_params.iter().enumerate() {
        if p >= n {
            return Err(TwinError::IndexOutOfRange {
                context: "augmented stiffness index",
                index: p,
                len: n,
            });
        }
        if param_slot[p].is_some() {
            return Err(TwinError::invalid(
                "augment_params",
                format!("stiffness {p} listed twice"),
            ));
        }
        param_slot[p] = Some(2 * n + j);
    }
    let layout = system.layout();
    let mut labels = vec![StateLabel::Displacement(0); 2 * n + augment_params.len()];
    for i in 0..n {
        labels[layout.displacement(n, i)] = StateLabel::Displacement(i);
        labels[layout.velocity(n, i)] = StateLabel::Velocity(i);
    }
    for (j, &p) in augment_params.iter().enumerate() {
        labels[2 * n + j] = StateLabel::Stiffness(p);
    }
    Ok(StateSpaceModel {
        system: system.clone(),
        augmented: augment_params.to_vec(),
        param_slot,
        labels,
    })
}

impl StateSpaceModel {
    pub fn system(&self) -> &MdofSystem {
        &self.system
    }

    pub fn n_dof(&self) -> usize {
        self.system.n_dof()
    }

    pub fn layout(&self) -> StateLayout {
        self.system.layout()
    }

    pub fn labels(&self) -> &[StateLabel] {
        &self.labels
    }

    pub fn augmented(&self) -> &[usize] {
        &self.augmented
    }

    pub fn is_augmented(&self) -> bool {
        !self.augmented.is_empty()
    }

    pub fn param_slot(&self, stiffness_index: usize) -> Option<usize> {
        self.param_slot.get(stiffness_index).copied().flatten()
    }

    pub fn displacement_index(&self, dof: usize) -> usize {
        self.layout().displacement(self.n_dof(), dof)
    }

    pub fn velocity_index(&self, dof: usize) -> usize {
        self.layout().velocity(self.n_dof(), dof)
    }

    /// Splits a state vector into displacements, velocities and the
    /// effective stiffness vector (augmented entries read from the state).
    pub fn unpack(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n_dof();
        let layout = self.layout();
        let x = (0..n).map(|i| y[layout.displacement(n, i)]).collect();
        let v = (0..n).map(|i| y[layout.velocity(n, i)]).collect();
        let k = (0..n)
            .map(|i| match self.param_slot[i] {
                Some(s) => y[s],
                None => self.system.stiffnesses()[i],
            })
            .collect();
        (x, v, k)
    }

    /// Packs displacements/velocities (and the current augmented stiffness
    /// values from `k`) into a state vector.
    pub fn pack(&self, x: &[f64], v: &[f64], k: &[f64]) -> DVector<f64> {
        let n = self.n_dof();
        let layout = self.layout();
        let mut y = DVector::zeros(self.dim());
        for i in 0..n {
            y[layout.displacement(n, i)] = x[i];
            y[layout.velocity(n, i)] = v[i];
        }
        for (j, &p) in self.augmented.iter().enumerate() {
            y[2 * n + j] = k[p];
        }
        y
    }

    /// Restoring force `G(x) + K(k) x + C ẋ` for the given state.
    pub fn restoring_force(&self, y: &[f64]) -> Vec<f64> {
        let (x, v, k) = self.unpack(y);
        let mut r = vec![0.0; self.n_dof()];
        self.system.add_stiffness_force(&k, &x, &mut r);
        self.system.add_damping_force(&v, &mut r);
        self.system.add_nonlinear_force(&x, &mut r);
        r
    }

    /// Acceleration excluding the external force: `−M⁻¹(G + Kx + Cẋ)`.
    pub fn restoring_acceleration(&self, y: &[f64]) -> Vec<f64> {
        self.restoring_force(y)
            .into_iter()
            .zip(self.system.masses())
            .map(|(r, m)| -r / m)
            .collect()
    }

    fn dispersion_scale(&self, dof: usize, y: &[f64]) -> f64 {
        let base = self.system.noise_sigmas()[dof] / self.system.masses()[dof];
        match self.system.noise_scaling()[dof] {
            NoiseScaling::Additive => base,
            NoiseScaling::DisplacementModulated => base * y[self.displacement_index(dof)],
        }
    }

    /// Diagonal-equivalent dispersion: entry `r` is the nonzero of row `r` of
    /// `b(y)` (each noise channel drives exactly one velocity row).
    pub fn dispersion_row_scales(&self, y: &[f64]) -> DVector<f64> {
        let mut s = DVector::zeros(self.dim());
        for dof in 0..self.n_dof() {
            s[self.velocity_index(dof)] = self.dispersion_scale(dof, y);
        }
        s
    }
}

impl SdeModel for StateSpaceModel {
    fn dim(&self) -> usize {
        2 * self.n_dof() + self.augmented.len()
    }

    fn noise_dim(&self) -> usize {
        self.n_dof()
    }

    fn drift(&self, y: &DVector<f64>, input: &[f64]) -> DVector<f64> {
        let n = self.n_dof();
        let ys = y.as_slice();
        let r = self.restoring_force(ys);
        let mut a = DVector::zeros(self.dim());
        for i in 0..n {
            let f = input.get(i).copied().unwrap_or(0.0);
            a[self.displacement_index(i)] = ys[self.velocity_index(i)];
            a[self.velocity_index(i)] = (f - r[i]) / self.system.masses()[i];
        }
        a
    }

    fn dispersion(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.dim(), self.n_dof());
        for dof in 0..self.n_dof() {
            b[(self.velocity_index(dof), dof)] = self.dispersion_scale(dof, y.as_slice());
        }
        b
    }

    fn drift_jacobian(&self, y: &DVector<f64>, _input: &[f64]) -> DMatrix<f64> {
        let n = self.n_dof();
        let sys = &self.system;
        let ys = y.as_slice();
        let (x, _, k) = self.unpack(ys);
        let mut j = DMatrix::zeros(self.dim(), self.dim());
        for i in 0..n {
            j[(self.displacement_index(i), self.velocity_index(i))] = 1.0;
        }
        let kmat = sys.stiffness_matrix(&k);
        let cmat = sys.damping_matrix();
        for i in 0..n {
            let row = self.velocity_index(i);
            let m = sys.masses()[i];
            for c in 0..n {
                j[(row, self.displacement_index(c))] -= kmat[(i, c)] / m;
                j[(row, self.velocity_index(c))] -= cmat[(i, c)] / m;
            }
        }
        for (i, c, d) in sys.nonlinear_jacobian_entries(&x) {
            j[(self.velocity_index(i), self.displacement_index(c))] -= d / sys.masses()[i];
        }
        for (slot, &p) in self.augmented.iter().enumerate() {
            let col = 2 * n + slot;
            for (i, d) in sys.stiffness_sensitivity(p, &x) {
                j[(self.velocity_index(i), col)] -= d / sys.masses()[i];
            }
        }
        j
    }

    fn drift_hessian_contraction(
        &self,
        y: &DVector<f64>,
        _input: &[f64],
        weight: &DMatrix<f64>,
    ) -> DVector<f64> {
        let n = self.n_dof();
        let sys = &self.system;
        let (x, _, _) = self.unpack(y.as_slice());
        let mut out = DVector::zeros(self.dim());
        for (i, p, q, h) in sys.nonlinear_hessian_entries(&x) {
            let w = weight[(self.displacement_index(p), self.displacement_index(q))];
            out[self.velocity_index(i)] -= w * h / sys.masses()[i];
        }
        // mixed ∂x ∂k terms appear twice in the symmetric contraction
        for (slot, &p) in self.augmented.iter().enumerate() {
            let col = 2 * n + slot;
            for (i, c, e) in sys.stiffness_pattern(p) {
                let w = weight[(self.displacement_index(c), col)] + weight[(col, self.displacement_index(c))];
                out[self.velocity_index(i)] -= w * e / sys.masses()[i];
            }
        }
        out
    }

    fn dispersion_derivative(&self, _y: &DVector<f64>, direction: &DVector<f64>) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.dim(), self.n_dof());
        for dof in 0..self.n_dof() {
            if self.system.noise_scaling()[dof] == NoiseScaling::DisplacementModulated {
                let base = self.system.noise_sigmas()[dof] / self.system.masses()[dof];
                d[(self.velocity_index(dof), dof)] = base * direction[self.displacement_index(dof)];
            }
        }
        d
    }

    fn dispersion_hessian_contraction(&self, _y: &DVector<f64>, _weight: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::zeros(self.dim(), self.n_dof())
    }

    fn has_additive_noise(&self) -> bool {
        self.system
            .noise_scaling()
            .iter()
            .zip(self.system.noise_sigmas())
            .all(|(s, &sigma)| *s == NoiseScaling::Additive || sigma == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_duffing_2dof, build_dvp_7dof, SevenDofParams, TwoDofParams};

    fn two_dof() -> MdofSystem {
        build_duffing_2dof(&TwoDofParams::default()).unwrap()
    }

    #[test]
    fn dims_and_labels() {
        let m = to_state_space(&two_dof(), &[]).unwrap();
        assert_eq!(m.dim(), 4);
        let m = to_state_space(&two_dof(), &[0, 1]).unwrap();
        assert_eq!(m.dim(), 6);
        assert_eq!(m.labels()[4], StateLabel::Stiffness(0));
        assert_eq!(m.labels()[2], StateLabel::Velocity(0));
        let s7 = build_dvp_7dof(&SevenDofParams::default()).unwrap();
        let m7 = to_state_space(&s7, &[0, 1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(m7.dim(), 21);
        assert_eq!(m7.labels()[6], StateLabel::Displacement(3));
        assert_eq!(m7.labels()[7], StateLabel::Velocity(3));
    }

    #[test]
    fn rejects_bad_augmentation() {
        assert!(matches!(
            to_state_space(&two_dof(), &[2]),
            Err(TwinError::IndexOutOfRange { .. })
        ));
        assert!(to_state_space(&two_dof(), &[0, 0]).is_err());
    }

    #[test]
    fn two_dof_drift_matches_hand_form() {
        let s = two_dof();
        let m = to_state_space(&s, &[]).unwrap();
        let y = DVector::from_vec(vec![0.3, -0.2, 0.5, 1.1]);
        let f = [2.0, -3.0];
        let a = m.drift(&y, &f);
        let (m1, m2, c1, c2, k1, k2, al) = (20.0, 10.0, 10.0, 5.0, 1000.0, 500.0, 100.0);
        let (y1, y2, y3, y4) = (0.3, -0.2, 0.5, 1.1);
        let a3 = f[0] / m1 - (c1 * y3 + c2 * y3 - c2 * y4 + k1 * y1 + k2 * y1 - k2 * y2 + al * y1 * y1 * y1) / m1;
        let a4 = (c2 * y3 - c2 * y4 + k2 * y1 - k2 * y2) / m2 + f[1] / m2;
        assert_eq!(a[0], y3);
        assert_eq!(a[1], y4);
        assert!((a[2] - a3).abs() < 1e-12);
        assert!((a[3] - a4).abs() < 1e-12);
    }

    #[test]
    fn augmented_parameter_rows_are_zero() {
        let m = to_state_space(&two_dof(), &[0, 1]).unwrap();
        let y = DVector::from_vec(vec![0.1, 0.2, 0.3, 0.4, 900.0, 450.0]);
        let a = m.drift(&y, &[1.0, 1.0]);
        assert_eq!(a[4], 0.0);
        assert_eq!(a[5], 0.0);
        let b = m.dispersion(&y);
        assert!(b.row(4).iter().chain(b.row(5).iter()).all(|&v| v == 0.0));
        assert_eq!(b[(2, 0)], 0.1 / 20.0);
        assert_eq!(b[(3, 1)], 0.1 / 10.0);
    }

    #[test]
    fn equilibrium_has_zero_drift() {
        let s7 = build_dvp_7dof(&SevenDofParams::default()).unwrap();
        for (sys, aug) in [(two_dof(), vec![0, 1]), (s7, (0..7).collect())] {
            let m = to_state_space(&sys, &aug).unwrap();
            let mut y = DVector::zeros(m.dim());
            for (j, &p) in aug.iter().enumerate() {
                y[2 * sys.n_dof() + j] = sys.stiffnesses()[p];
            }
            let a = m.drift(&y, &vec![0.0; sys.n_dof()]);
            assert!(a.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn seven_dof_state_dependent_dispersion() {
        let s7 = build_dvp_7dof(&SevenDofParams::default()).unwrap();
        let m = to_state_space(&s7, &[]).unwrap();
        let mut y = DVector::zeros(14);
        y[6] = 2.5; // x4 in the interleaved layout
        let b = m.dispersion(&y);
        assert!((b[(7, 3)] - 0.1 / 10.0 * 2.5).abs() < 1e-15);
        assert_eq!(b[(1, 0)], 0.1 / 20.0);
        assert!(!m.has_additive_noise());
        assert!(to_state_space(&two_dof(), &[]).unwrap().has_additive_noise());
    }

    #[test]
    fn pack_unpack_round_trip() {
        let s7 = build_dvp_7dof(&SevenDofParams::default()).unwrap();
        let m = to_state_space(&s7, &[1, 4]).unwrap();
        let x: Vec<f64> = (0..7).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = (0..7).map(|i| -(i as f64) * 0.2).collect();
        let mut k = s7.stiffnesses().to_vec();
        k[1] = 1234.0;
        let y = m.pack(&x, &v, &k);
        let (x2, v2, k2) = m.unpack(y.as_slice());
        assert_eq!(x, x2);
        assert_eq!(v, v2);
        assert_eq!(k, k2);
    }
}
