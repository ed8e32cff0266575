//! Box-constrained quasi-Newton minimisation and Latin-hypercube starts.

use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Clone, Debug)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    /// Projected-gradient ∞-norm at `x`.
    pub epsilon: f64,
    pub converged: bool,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((&xi, &gi), (&l, &h))| ((xi - gi).clamp(l, h) - xi).abs())
        .fold(0.0, f64::max)
}

/// Stationarity level, relative to `max(1, |f|)`, accepted when the line
/// search can no longer reduce `f` in floating point.
const STALL_EPSILON: f64 = 1e-4;

/// Projected BFGS with Armijo backtracking. Stops when `iter ≥ max_iter`
/// or the projected gradient drops to `tol`.
pub(crate) fn minimize<F>(f: F, x0: &[f64], lo: &[f64], hi: &[f64], tol: f64, max_iter: usize) -> Minimum
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let Some((mut fx, mut g)) = f(&x) else {
        return Minimum {
            x,
            f: f64::INFINITY,
            iterations: 0,
            epsilon: f64::INFINITY,
            converged: false,
        };
    };
    let identity = |n: usize| {
        let mut h = vec![vec![0.0; n]; n];
        for (i, row) in h.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        h
    };
    let mut h = identity(n);
    let mut iter = 0;
    let mut eps = projected_gradient_norm(&x, &g, lo, hi);
    let mut stalled = false;
    while iter < max_iter && eps > tol {
        iter += 1;
        // variables pinned at an active bound are excluded from the step
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        for i in (0..n).filter(|&i| !free[i]) {
            for j in 0..n {
                h[i][j] = 0.0;
                h[j][i] = 0.0;
            }
            h[i][i] = 1.0;
        }
        let mut d: Vec<f64> = (0..n)
            .map(|i| {
                if free[i] {
                    -(0..n).filter(|&j| free[j]).map(|j| h[i][j] * g[j]).sum::<f64>()
                } else {
                    0.0
                }
            })
            .collect();
        if d.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() >= 0.0 {
            h = identity(n);
            d = (0..n).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            project(&mut xn, lo, hi);
            let dec: f64 = g.iter().zip(xn.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum();
            if let Some((fn_, gn)) = f(&xn) {
                if fn_.is_finite() && fn_ <= fx + 1e-4 * dec {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            stalled = true;
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = (0..n).map(|i| if free[i] { gn[i] - g[i] } else { 0.0 }).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 * s.iter().map(|v| v * v).sum::<f64>().sqrt() * y.iter().map(|v| v * v).sum::<f64>().sqrt() {
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i][j] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        let df = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        eps = projected_gradient_norm(&x, &g, lo, hi);
        if df.abs() <= f64::EPSILON * fx.abs().max(1.0) && s.iter().all(|v| v.abs() <= 1e-12) {
            stalled = true;
            break;
        }
    }
    let converged = eps <= tol || (stalled && eps <= STALL_EPSILON * fx.abs().max(1.0));
    Minimum {
        x,
        f: fx,
        iterations: iter,
        epsilon: eps,
        converged,
    }
}

/// `n` Latin-hypercube samples in the box `[lo, hi]`.
pub(crate) fn latin_hypercube<R: Rng>(rng: &mut R, n: usize, lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    let d = lo.len();
    let mut out = vec![vec![0.0; d]; n];
    for k in 0..d {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (i, s) in strata.into_iter().enumerate() {
            let u: f64 = rng.random();
            out[i][k] = lo[k] + (hi[k] - lo[k]) * (s as f64 + u) / n as f64;
        }
    }
    out
}
