//! Deterministic seed derivation.
//!
//! All randomness in the crate flows from a single 64-bit root seed.  Streams
//! for sub-tasks (one field sample, one SDE trial, ...) are derived by mixing
//! the root seed with a stream label through SplitMix64, so per-trial seeds
//! are reproducible independently of execution order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; used to decorrelate derived seeds.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed for stream `label` from `root`.
pub fn derive_seed(root: u64, label: u64) -> u64 {
    splitmix64(root ^ splitmix64(label))
}

/// Seeded generator for one stream.
pub fn stream_rng(root: u64, label: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, label))
}
