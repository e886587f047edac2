//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! seeded from a master seed and a small tuple of stream labels, so that
//! results depend only on (master seed, role, index) and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a sequence of labels.
pub fn derive(seed: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(mix64(seed), |acc, &l| mix64(acc ^ mix64(l)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_for(seed: u64, labels: &[u64]) -> ChaCha8Rng {
    rng(derive(seed, labels))
}

// Stream labels.
pub const STREAM_INIT: u64 = 1;
pub const STREAM_EVAL: u64 = 2;
pub const STREAM_REPRO: u64 = 3;
pub const STREAM_REPLICATE: u64 = 4;
pub const STREAM_TRAIN: u64 = 5;
pub const STREAM_ARENA: u64 = 6;
