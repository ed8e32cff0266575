use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, TwinError};

/// Population standard deviation.
pub fn sample_std(x: impl ExactSizeIterator<Item = f64> + Clone) -> f64 {
    let n = x.len() as f64;
    let mean = x.clone().sum::<f64>() / n;
    (x.map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// `σ_noise = σ_signal / √snr`.
pub fn noise_std_for_snr(signal_std: f64, snr: f64) -> f64 {
    signal_std / snr.sqrt()
}

/// Adds white Gaussian noise to every column of `signal` (rows are time
/// samples) so that `var(signal) / var(noise) = snr` per channel.
pub fn corrupt_with_snr<R: Rng + ?Sized>(signal: &DMatrix<f64>, snr: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    if !(snr > 0.0) {
        return Err(TwinError::invalid("snr", "must be positive"));
    }
    let mut out = signal.clone();
    for c in 0..signal.ncols() {
        let sd = sample_std(signal.column(c).iter().copied());
        if !(sd > 0.0) {
            return Err(TwinError::ZeroVariance { channel: c });
        }
        let noise_sd = noise_std_for_snr(sd, snr);
        for r in 0..signal.nrows() {
            let e: f64 = rng.sample(StandardNormal);
            out[(r, c)] += noise_sd * e;
        }
    }
    Ok(out)
}
