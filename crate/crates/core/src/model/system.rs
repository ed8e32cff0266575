//! Chain-topology N-DOF systems `M ẍ + C ẋ + K x + G(x) = F + Σ Ẇ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TwinError};

/// Ordering of displacement/velocity entries inside a state vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StateLayout {
    /// `[x_1..x_N, ẋ_1..ẋ_N]`
    #[default]
    Blocked,
    /// `[x_1, ẋ_1, x_2, ẋ_2, ...]`
    Interleaved,
}

impl StateLayout {
    #[inline]
    pub fn displacement(self, _n_dof: usize, dof: usize) -> usize {
        match self {
            StateLayout::Blocked => dof,
            StateLayout::Interleaved => 2 * dof,
        }
    }

    #[inline]
    pub fn velocity(self, n_dof: usize, dof: usize) -> usize {
        match self {
            StateLayout::Blocked => n_dof + dof,
            StateLayout::Interleaved => 2 * dof + 1,
        }
    }
}

/// Polynomial restoring-force nonlinearity `G(x, α)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    #[default]
    None,
    /// `G_dof = α x_dof³` (Duffing element to ground).
    GroundedCubic { dof: usize },
    /// `G_first = α (x_first − x_second)³`, `G_second = −G_first`.
    RelativeCubic { first: usize, second: usize },
}

/// How the stochastic load on a DOF scales with the state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScaling {
    /// Dispersion entry `σ_i / m_i`.
    #[default]
    Additive,
    /// Dispersion entry `σ_i x_i / m_i`.
    DisplacementModulated,
}

/// JSON form of a system; field names follow the tabulated parameter sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemDocument {
    #[serde(default)]
    pub name: String,
    pub masses: Vec<f64>,
    pub stiffnesses: Vec<f64>,
    pub dampings: Vec<f64>,
    pub force_amplitudes: Vec<f64>,
    pub force_frequencies: Vec<f64>,
    pub noise_sigmas: Vec<f64>,
    #[serde(default)]
    pub noise_scaling: Vec<NoiseScaling>,
    pub nonlinear_coeff: f64,
    #[serde(default)]
    pub nonlinearity: Nonlinearity,
    /// Links whose coupling sign is flipped relative to a standard chain.
    #[serde(default)]
    pub inverted_links: Vec<usize>,
    #[serde(default)]
    pub state_layout: StateLayout,
    /// Stiffness indices that do not degrade on the slow timescale.
    #[serde(default)]
    pub frozen_indices: Vec<usize>,
}

/// A validated N-DOF chain system.
///
/// Link `0` ties DOF 0 to ground; link `i > 0` couples DOF `i−1` and DOF `i`
/// with stiffness `k_i` and damping `c_i`. Matrices are never stored: forces
/// are evaluated link by link, which is exact for the tri-diagonal structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemDocument", into = "SystemDocument")]
pub struct MdofSystem {
    doc: SystemDocument,
    link_sign: Vec<f64>,
}

impl TryFrom<SystemDocument> for MdofSystem {
    type Error = TwinError;

    fn try_from(doc: SystemDocument) -> Result<Self> {
        MdofSystem::new(doc)
    }
}

impl From<MdofSystem> for SystemDocument {
    fn from(s: MdofSystem) -> Self {
        s.doc
    }
}

fn check_len(name: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(TwinError::invalid(
            name,
            format!("expected {n} entries, got {}", v.len()),
        ));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(TwinError::invalid(name, "entries must be finite"));
    }
    Ok(())
}

impl MdofSystem {
    pub fn new(mut doc: SystemDocument) -> Result<Self> {
        let n = doc.masses.len();
        if n == 0 {
            return Err(TwinError::invalid("masses", "at least one DOF is required"));
        }
        check_len("masses", &doc.masses, n)?;
        check_len("stiffnesses", &doc.stiffnesses, n)?;
        check_len("dampings", &doc.dampings, n)?;
        check_len("force_amplitudes", &doc.force_amplitudes, n)?;
        check_len("force_frequencies", &doc.force_frequencies, n)?;
        check_len("noise_sigmas", &doc.noise_sigmas, n)?;
        if doc.masses.iter().any(|&m| m <= 0.0) {
            return Err(TwinError::invalid("masses", "must be strictly positive"));
        }
        if doc.stiffnesses.iter().any(|&k| k <= 0.0) {
            return Err(TwinError::invalid("stiffnesses", "must be strictly positive"));
        }
        if doc.dampings.iter().any(|&c| c < 0.0) {
            return Err(TwinError::invalid("dampings", "must be non-negative"));
        }
        if doc.noise_sigmas.iter().any(|&s| s < 0.0) {
            return Err(TwinError::invalid("noise_sigmas", "must be non-negative"));
        }
        if !doc.nonlinear_coeff.is_finite() {
            return Err(TwinError::invalid("nonlinear_coeff", "must be finite"));
        }
        if doc.noise_scaling.is_empty() {
            doc.noise_scaling = vec![NoiseScaling::Additive; n];
        } else if doc.noise_scaling.len() != n {
            return Err(TwinError::invalid(
                "noise_scaling",
                format!("expected {n} entries, got {}", doc.noise_scaling.len()),
            ));
        }
        match doc.nonlinearity {
            Nonlinearity::None => {}
            Nonlinearity::GroundedCubic { dof } => {
                if dof >= n {
                    return Err(TwinError::IndexOutOfRange {
                        context: "nonlinearity dof",
                        index: dof,
                        len: n,
                    });
                }
            }
            Nonlinearity::RelativeCubic { first, second } => {
                for idx in [first, second] {
                    if idx >= n {
                        return Err(TwinError::IndexOutOfRange {
                            context: "nonlinearity dof",
                            index: idx,
                            len: n,
                        });
                    }
                }
                if first == second {
                    return Err(TwinError::invalid(
                        "nonlinearity",
                        "relative element needs two distinct DOFs",
                    ));
                }
            }
        }
        let mut link_sign = vec![1.0; n];
        for &l in &doc.inverted_links {
            if l == 0 || l >= n {
                return Err(TwinError::IndexOutOfRange {
                    context: "inverted_links (link 0 is the ground link)",
                    index: l,
                    len: n,
                });
            }
            link_sign[l] = -1.0;
        }
        for &f in &doc.frozen_indices {
            if f >= n {
                return Err(TwinError::IndexOutOfRange {
                    context: "frozen_indices",
                    index: f,
                    len: n,
                });
            }
        }
        doc.inverted_links.sort_unstable();
        doc.inverted_links.dedup();
        doc.frozen_indices.sort_unstable();
        doc.frozen_indices.dedup();
        Ok(Self { doc, link_sign })
    }

    pub fn document(&self) -> &SystemDocument {
        &self.doc
    }

    pub fn name(&self) -> &str {
        &self.doc.name
    }

    pub fn n_dof(&self) -> usize {
        self.doc.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.doc.masses
    }

    pub fn stiffnesses(&self) -> &[f64] {
        &self.doc.stiffnesses
    }

    pub fn dampings(&self) -> &[f64] {
        &self.doc.dampings
    }

    pub fn noise_sigmas(&self) -> &[f64] {
        &self.doc.noise_sigmas
    }

    pub fn noise_scaling(&self) -> &[NoiseScaling] {
        &self.doc.noise_scaling
    }

    pub fn nonlinear_coeff(&self) -> f64 {
        self.doc.nonlinear_coeff
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.doc.nonlinearity
    }

    pub fn layout(&self) -> StateLayout {
        self.doc.state_layout
    }

    pub fn frozen_indices(&self) -> &[usize] {
        &self.doc.frozen_indices
    }

    pub fn link_sign(&self, link: usize) -> f64 {
        self.link_sign[link]
    }

    /// Copy of this system with a different stiffness vector.
    pub fn with_stiffnesses(&self, k: &[f64]) -> Result<Self> {
        let mut doc = self.doc.clone();
        doc.stiffnesses = k.to_vec();
        Self::new(doc)
    }

    /// Copy of this system with a different state layout.
    pub fn with_layout(&self, layout: StateLayout) -> Self {
        let mut s = self.clone();
        s.doc.state_layout = layout;
        s
    }

    /// Copy with all noise intensities set to zero.
    pub fn without_noise(&self) -> Self {
        let mut s = self.clone();
        s.doc.noise_sigmas.iter_mut().for_each(|v| *v = 0.0);
        s
    }

    /// Deterministic harmonic force `λ_i sin(ω_i t)`.
    pub fn force_at(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.n_dof(),
            self.doc
                .force_amplitudes
                .iter()
                .zip(&self.doc.force_frequencies)
                .map(|(a, w)| a * (w * t).sin()),
        )
    }

    /// Accumulates the chain link forces for link coefficients `coef` acting on `u`.
    fn accumulate_links(&self, coef: &[f64], signed: bool, u: &[f64], out: &mut [f64]) {
        out[0] += coef[0] * u[0];
        for i in 1..self.n_dof() {
            let s = if signed { self.link_sign[i] } else { 1.0 };
            let f = s * coef[i] * (u[i - 1] - u[i]);
            out[i - 1] += f;
            out[i] -= f;
        }
    }

    /// Adds `K(k) x` into `out`.
    pub fn add_stiffness_force(&self, k: &[f64], x: &[f64], out: &mut [f64]) {
        self.accumulate_links(k, true, x, out);
    }

    /// Adds `C ẋ` into `out`.
    pub fn add_damping_force(&self, v: &[f64], out: &mut [f64]) {
        self.accumulate_links(&self.doc.dampings, false, v, out);
    }

    /// Adds `G(x, α)` into `out`.
    pub fn add_nonlinear_force(&self, x: &[f64], out: &mut [f64]) {
        let a = self.doc.nonlinear_coeff;
        match self.doc.nonlinearity {
            Nonlinearity::None => {}
            Nonlinearity::GroundedCubic { dof } => out[dof] += a * x[dof].powi(3),
            Nonlinearity::RelativeCubic { first, second } => {
                let g = a * (x[first] - x[second]).powi(3);
                out[first] += g;
                out[second] -= g;
            }
        }
    }

    /// `G(x, α)` as a vector.
    pub fn nonlinear_term(&self, x: &[f64]) -> DVector<f64> {
        let mut out = vec![0.0; self.n_dof()];
        self.add_nonlinear_force(x, &mut out);
        DVector::from_vec(out)
    }

    /// Nonzero entries `(i, j, ∂G_i/∂x_j)` of the nonlinear Jacobian.
    pub fn nonlinear_jacobian_entries(&self, x: &[f64]) -> Vec<(usize, usize, f64)> {
        let a = self.doc.nonlinear_coeff;
        match self.doc.nonlinearity {
            Nonlinearity::None => Vec::new(),
            Nonlinearity::GroundedCubic { dof } => vec![(dof, dof, 3.0 * a * x[dof].powi(2))],
            Nonlinearity::RelativeCubic { first, second } => {
                let d = 3.0 * a * (x[first] - x[second]).powi(2);
                vec![
                    (first, first, d),
                    (first, second, -d),
                    (second, first, -d),
                    (second, second, d),
                ]
            }
        }
    }

    /// Nonzero entries `(i, j, l, ∂²G_i/∂x_j∂x_l)` of the nonlinear Hessian.
    pub fn nonlinear_hessian_entries(&self, x: &[f64]) -> Vec<(usize, usize, usize, f64)> {
        let a = self.doc.nonlinear_coeff;
        match self.doc.nonlinearity {
            Nonlinearity::None => Vec::new(),
            Nonlinearity::GroundedCubic { dof } => vec![(dof, dof, dof, 6.0 * a * x[dof])],
            Nonlinearity::RelativeCubic { first, second } => {
                let h = 6.0 * a * (x[first] - x[second]);
                let sign = |p: usize| if p == first { 1.0 } else { -1.0 };
                let mut v = Vec::with_capacity(8);
                for (row, rs) in [(first, 1.0), (second, -1.0)] {
                    for p in [first, second] {
                        for q in [first, second] {
                            v.push((row, p, q, rs * h * sign(p) * sign(q)));
                        }
                    }
                }
                v
            }
        }
    }

    /// Linear-stiffness contribution of link `link` to the restoring force,
    /// i.e. `∂(K x)/∂k_link` as a sparse list `(row, value)`.
    pub fn stiffness_sensitivity(&self, link: usize, x: &[f64]) -> Vec<(usize, f64)> {
        if link == 0 {
            vec![(0, x[0])]
        } else {
            let d = self.link_sign[link] * (x[link - 1] - x[link]);
            vec![(link - 1, d), (link, -d)]
        }
    }

    /// `∂²(K x)_row / ∂k_link ∂x_col` entries `(row, col, value)`.
    pub fn stiffness_pattern(&self, link: usize) -> Vec<(usize, usize, f64)> {
        if link == 0 {
            vec![(0, 0, 1.0)]
        } else {
            let s = self.link_sign[link];
            vec![
                (link - 1, link - 1, s),
                (link - 1, link, -s),
                (link, link - 1, -s),
                (link, link, s),
            ]
        }
    }

    pub fn mass_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.doc.masses))
    }

    fn assemble(&self, f: impl Fn(&[f64], &mut [f64])) -> DMatrix<f64> {
        let n = self.n_dof();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let mut col = vec![0.0; n];
            f(&e, &mut col);
            m.set_column(j, &DVector::from_vec(col));
        }
        m
    }

    /// Dense `K(k)` for the given stiffness vector.
    pub fn stiffness_matrix(&self, k: &[f64]) -> DMatrix<f64> {
        self.assemble(|e, out| self.add_stiffness_force(k, e, out))
    }

    pub fn damping_matrix(&self) -> DMatrix<f64> {
        self.assemble(|e, out| self.add_damping_force(e, out))
    }

    pub fn noise_intensity_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.doc.noise_sigmas))
    }
}

/// Parameter set for the two-DOF system with a Duffing element on DOF 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoDofParams {
    pub masses: [f64; 2],
    pub stiffnesses: [f64; 2],
    pub dampings: [f64; 2],
    pub force_amplitudes: [f64; 2],
    pub force_frequencies: [f64; 2],
    pub noise_sigmas: [f64; 2],
    pub alpha: f64,
}

impl Default for TwoDofParams {
    fn default() -> Self {
        Self {
            masses: [20.0, 10.0],
            stiffnesses: [1000.0, 500.0],
            dampings: [10.0, 5.0],
            force_amplitudes: [10.0, 10.0],
            force_frequencies: [10.0, 10.0],
            noise_sigmas: [0.1, 0.1],
            alpha: 100.0,
        }
    }
}

fn require_positive(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|&x| !(x > 0.0)) {
        return Err(TwinError::invalid(name, "all entries must be positive"));
    }
    Ok(())
}

pub fn build_duffing_2dof(p: &TwoDofParams) -> Result<MdofSystem> {
    require_positive("masses", &p.masses)?;
    require_positive("stiffnesses", &p.stiffnesses)?;
    require_positive("dampings", &p.dampings)?;
    require_positive("alpha", &[p.alpha])?;
    MdofSystem::new(SystemDocument {
        name: "duffing-2dof".into(),
        masses: p.masses.to_vec(),
        stiffnesses: p.stiffnesses.to_vec(),
        dampings: p.dampings.to_vec(),
        force_amplitudes: p.force_amplitudes.to_vec(),
        force_frequencies: p.force_frequencies.to_vec(),
        noise_sigmas: p.noise_sigmas.to_vec(),
        noise_scaling: vec![NoiseScaling::Additive; 2],
        nonlinear_coeff: p.alpha,
        nonlinearity: Nonlinearity::GroundedCubic { dof: 0 },
        inverted_links: Vec::new(),
        state_layout: StateLayout::Blocked,
        frozen_indices: Vec::new(),
    })
}

/// Sign convention for the link between DOF 3 and DOF 4 of the seven-DOF chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LinkSigns {
    /// Diagonal `k3 − k4`, `−k4 + k5` and off-diagonal `+k4`, as tabulated
    /// for the Duffing–van der Pol benchmark.
    #[default]
    AsPrinted,
    /// Standard chain assembly (symmetric positive definite).
    Consistent,
}

/// Parameter set for the seven-DOF chain with a Duffing–van der Pol element
/// between DOF 3 and DOF 4.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SevenDofParams {
    pub masses: [f64; 7],
    pub stiffnesses: [f64; 7],
    pub dampings: [f64; 7],
    pub force_amplitudes: [f64; 7],
    pub force_frequencies: [f64; 7],
    pub noise_sigmas: [f64; 7],
    pub alpha: f64,
    pub link_signs: LinkSigns,
}

impl Default for SevenDofParams {
    fn default() -> Self {
        Self {
            masses: [20.0, 20.0, 10.0, 10.0, 10.0, 10.0, 5.0],
            stiffnesses: [2000.0, 2000.0, 1000.0, 1000.0, 1000.0, 1000.0, 500.0],
            dampings: [20.0; 7],
            force_amplitudes: [10.0; 7],
            force_frequencies: [10.0; 7],
            noise_sigmas: [0.1; 7],
            alpha: 100.0,
            link_signs: LinkSigns::AsPrinted,
        }
    }
}

pub fn build_dvp_7dof(p: &SevenDofParams) -> Result<MdofSystem> {
    require_positive("masses", &p.masses)?;
    require_positive("stiffnesses", &p.stiffnesses)?;
    require_positive("dampings", &p.dampings)?;
    require_positive("alpha", &[p.alpha])?;
    let mut noise_scaling = vec![NoiseScaling::Additive; 7];
    noise_scaling[3] = NoiseScaling::DisplacementModulated;
    let inverted_links = match p.link_signs {
        LinkSigns::AsPrinted => vec![3],
        LinkSigns::Consistent => Vec::new(),
    };
    MdofSystem::new(SystemDocument {
        name: "dvp-7dof".into(),
        masses: p.masses.to_vec(),
        stiffnesses: p.stiffnesses.to_vec(),
        dampings: p.dampings.to_vec(),
        force_amplitudes: p.force_amplitudes.to_vec(),
        force_frequencies: p.force_frequencies.to_vec(),
        noise_sigmas: p.noise_sigmas.to_vec(),
        noise_scaling,
        nonlinear_coeff: p.alpha,
        nonlinearity: Nonlinearity::RelativeCubic { first: 2, second: 3 },
        inverted_links,
        state_layout: StateLayout::Interleaved,
        frozen_indices: vec![3],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_dof_defaults() {
        let s = build_duffing_2dof(&TwoDofParams::default()).unwrap();
        assert_eq!(s.masses(), &[20.0, 10.0]);
        assert_eq!(s.stiffnesses(), &[1000.0, 500.0]);
        assert_eq!(s.dampings(), &[10.0, 5.0]);
        assert_eq!(s.noise_sigmas(), &[0.1, 0.1]);
        assert_eq!(s.nonlinear_coeff(), 100.0);
        assert_eq!(s.force_at(0.0).as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn two_dof_nonlinear_term() {
        let s = build_duffing_2dof(&TwoDofParams::default()).unwrap();
        assert_eq!(s.nonlinear_term(&[0.0, 0.0]).as_slice(), &[0.0, 0.0]);
        assert_eq!(s.nonlinear_term(&[2.0, 0.7]).as_slice(), &[800.0, 0.0]);
    }

    #[test]
    fn two_dof_matrices_match_hand_expansion() {
        let s = build_duffing_2dof(&TwoDofParams::default()).unwrap();
        let k = s.stiffness_matrix(s.stiffnesses());
        assert_eq!(k, DMatrix::from_row_slice(2, 2, &[1500.0, -500.0, -500.0, 500.0]));
        let c = s.damping_matrix();
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[15.0, -5.0, -5.0, 5.0]));
    }

    #[test]
    fn seven_dof_defaults() {
        let s = build_dvp_7dof(&SevenDofParams::default()).unwrap();
        assert_eq!(s.masses(), &[20.0, 20.0, 10.0, 10.0, 10.0, 10.0, 5.0]);
        assert_eq!(
            s.stiffnesses(),
            &[2000.0, 2000.0, 1000.0, 1000.0, 1000.0, 1000.0, 500.0]
        );
        assert!(s.dampings().iter().all(|&c| c == 20.0));
        assert_eq!(s.nonlinear_coeff(), 100.0);
        assert_eq!(s.frozen_indices(), &[3]);
    }

    #[test]
    fn seven_dof_nonlinear_term() {
        let s = build_dvp_7dof(&SevenDofParams::default()).unwrap();
        let mut x = [0.3; 7];
        assert!(s.nonlinear_term(&x).iter().all(|&g| g == 0.0));
        x = [0.0; 7];
        x[2] = 1.0;
        let g = s.nonlinear_term(&x);
        let mut expected = [0.0; 7];
        expected[2] = 100.0;
        expected[3] = -100.0;
        assert_eq!(g.as_slice(), &expected);
    }

    #[test]
    fn seven_dof_printed_stiffness_pattern() {
        let s = build_dvp_7dof(&SevenDofParams::default()).unwrap();
        let k: Vec<f64> = (1..=7).map(|i| i as f64).collect();
        let m = s.stiffness_matrix(&k);
        // rows 3 and 4 (1-based) carry the printed k4 signs
        assert_eq!(m[(2, 1)], -3.0);
        assert_eq!(m[(2, 2)], 3.0 - 4.0);
        assert_eq!(m[(2, 3)], 4.0);
        assert_eq!(m[(3, 2)], 4.0);
        assert_eq!(m[(3, 3)], -4.0 + 5.0);
        assert_eq!(m[(3, 4)], -5.0);
        assert_eq!(m[(0, 0)], 1.0 + 2.0);
        assert_eq!(m[(6, 5)], -7.0);
        assert_eq!(m[(6, 6)], 7.0);
    }

    #[test]
    fn consistent_variant_is_standard_chain() {
        let p = SevenDofParams {
            link_signs: LinkSigns::Consistent,
            ..Default::default()
        };
        let s = build_dvp_7dof(&p).unwrap();
        let k = s.stiffness_matrix(s.stiffnesses());
        assert_eq!(k, k.transpose());
        assert_eq!(k[(2, 2)], 2000.0);
        assert_eq!(k[(2, 3)], -1000.0);
        let eig = k.symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn rejects_non_positive_parameters() {
        let mut p = TwoDofParams::default();
        p.masses[1] = 0.0;
        assert!(matches!(
            build_duffing_2dof(&p),
            Err(TwinError::InvalidParameter { .. })
        ));
        let mut p = SevenDofParams::default();
        p.stiffnesses[5] = -1.0;
        assert!(matches!(
            build_dvp_7dof(&p),
            Err(TwinError::InvalidParameter { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let s = build_dvp_7dof(&SevenDofParams::default()).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: MdofSystem = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        assert!(text.contains("\"stiffnesses\""));
    }

    #[test]
    fn json_validation_applies() {
        let s = build_duffing_2dof(&TwoDofParams::default()).unwrap();
        let mut doc = s.document().clone();
        doc.masses = vec![1.0];
        let text = serde_json::to_string(&doc).unwrap();
        assert!(serde_json::from_str::<MdofSystem>(&text).is_err());
    }
}
