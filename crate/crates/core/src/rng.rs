//! Deterministic random-number plumbing.
//!
//! Everything random in the crate flows through a ChaCha8 generator seeded
//! from a `u64`, so results are bit-reproducible across runs and platforms.
//! Independent work units (replications, fold shuffles) derive their own seed
//! with [`derive_seed`] instead of sharing a generator, which keeps parallel
//! execution deterministic.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Creates the generator for a given seed.
pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent seed for work unit `index` under `base`.
///
/// SplitMix64 finalizer; injective in `index` for a fixed base.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
