//! Seeded random streams.
//!
//! Every randomized routine draws from ChaCha12 (`rand_chacha`), seeded with
//! `seed_from_u64(seed)` and then moved to a numbered stream with
//! `set_stream`. A `(seed, stream)` pair therefore names one reproducible
//! sequence on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type SimRng = ChaCha12Rng;

/// Stream used by fold and train/calibration splitting.
pub const SPLIT_STREAM: u64 = 0;
/// Stream used by the cross-validation inside the binned gamma estimator.
pub const GAMMA_CV_STREAM: u64 = 1;
/// Stream used by `gen-data`.
pub const DATA_STREAM: u64 = 2;
/// Stream used by the potential-outcome variance Monte-Carlo.
pub const STANDARDIZER_STREAM: u64 = u64::MAX;

pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Child stream for simulation replicate `replicate`; streams below
/// `REPLICATE_BASE` are reserved for the named streams above.
pub fn replicate_stream(master_seed: u64, replicate: usize) -> SimRng {
    stream(master_seed, REPLICATE_BASE + replicate as u64)
}

const REPLICATE_BASE: u64 = 1 << 32;
