//! Seed derivation. Every random stream in the framework is derived from a
//! base seed plus a path of integers so that streams never overlap by accident.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::mix64;

pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(base), |acc, &p| mix64(acc ^ mix64(p.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

pub fn rng_for(base: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, path))
}
