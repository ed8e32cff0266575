//! Seed handling. Every random draw in the crate comes from a ChaCha8
//! stream identified by `(seed, stream)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids used inside one synthetic window.
pub mod streams {
    pub const PROCESS: u64 = 0;
    pub const FORCE_NOISE: u64 = 1;
    pub const ACCEL_NOISE: u64 = 2;
    pub const GP_RESTARTS: u64 = 3;
    pub const ENSEMBLE: u64 = 4;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of window `index` in a campaign with the given master seed.
pub fn window_seed(master: u64, index: usize) -> u64 {
    master.wrapping_add(index as u64)
}
