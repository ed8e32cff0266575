//! Central finite differences, used as default model derivatives and as an
//! independent check on analytic ones.

use nalgebra::{DMatrix, DVector};

fn step(y: f64) -> f64 {
    1e-5 * y.abs().max(1.0)
}

pub fn jacobian(f: &dyn Fn(&DVector<f64>) -> DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
    let n = y.len();
    let m = f(y).len();
    let mut j = DMatrix::zeros(m, n);
    let mut z = y.clone();
    for c in 0..n {
        let h = step(y[c]);
        z[c] = y[c] + h;
        let fp = f(&z);
        z[c] = y[c] - h;
        let fm = f(&z);
        z[c] = y[c];
        j.set_column(c, &((fp - fm) / (2.0 * h)));
    }
    j
}

/// `Σ_pq W_pq ∂_p∂_q f` over the nonzero entries of `W`.
pub fn hessian_contraction(
    f: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    y: &DVector<f64>,
    weight: &DMatrix<f64>,
) -> DVector<f64> {
    let mut out = DVector::zeros(f(y).len());
    let mut z = y.clone();
    for p in 0..y.len() {
        for q in 0..y.len() {
            let w = weight[(p, q)];
            if w == 0.0 {
                continue;
            }
            let (hp, hq) = (step(y[p]) * 10.0, step(y[q]) * 10.0);
            let mut eval = |sp: f64, sq: f64| {
                z[p] += sp * hp;
                z[q] += sq * hq;
                let v = f(&z);
                z[p] = y[p];
                z[q] = y[q];
                v
            };
            let d = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * hp * hq);
            out += d * w;
        }
    }
    out
}

pub fn directional_matrix(
    f: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    y: &DVector<f64>,
    direction: &DVector<f64>,
) -> DMatrix<f64> {
    let norm = direction.amax();
    if norm == 0.0 {
        let f0 = f(y);
        return DMatrix::zeros(f0.nrows(), f0.ncols());
    }
    let h = step(y.amax()) / norm;
    (f(&(y + direction * h)) - f(&(y - direction * h))) / (2.0 * h)
}

pub fn hessian_contraction_matrix(
    f: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    y: &DVector<f64>,
    weight: &DMatrix<f64>,
) -> DMatrix<f64> {
    let f0 = f(y);
    let (r, c) = f0.shape();
    let flat = |z: &DVector<f64>| DVector::from_column_slice(f(z).as_slice());
    let v = hessian_contraction(&flat, y, weight);
    DMatrix::from_column_slice(r, c, v.as_slice())
}
