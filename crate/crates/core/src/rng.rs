//! Seeded random streams.
//!
//! Every trajectory owns one ChaCha8 stream. Run `i` of a Monte Carlo study
//! with base seed `b` is seeded with `b.wrapping_add(i)`; this rule is part of
//! the reproducibility contract.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derive_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index)
}
