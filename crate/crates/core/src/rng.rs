//! Seed derivation.
//!
//! All stochastic steps use ChaCha8 (`rand_chacha::ChaCha8Rng`), seeded with a
//! 64-bit value mixed from the experiment's master seed and the coordinates of
//! the task (partition, method). The mixer is SplitMix64's finalizer, so seeds
//! are stable across platforms and independent of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Folds a list of coordinates into one seed.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix64(master), |acc, &p| mix64(acc ^ mix64(p)))
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
