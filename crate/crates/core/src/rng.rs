//! Seeded randomness shared by the splitter, the forest trainer, and the
//! synthetic generator.
//!
//! Every random draw in this crate comes from a ChaCha8 stream (recorded as
//! `chacha8` in model files) seeded through [`stream`], so results are
//! reproducible across platforms and parallelism degrees.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Name of the generator recorded in model files.
pub const RNG_NAME: &str = "chacha8";

/// SplitMix64 finalizer, used to derive independent stream keys.
pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// ChaCha8 stream keyed by (seed, index). Streams for distinct indices are
/// independent, so per-tree and per-record draws do not depend on order of
/// evaluation.
pub(crate) fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(index)))
}

/// Uniform draw in [-1, 1).
pub(crate) fn uniform_signed(rng: &mut ChaCha8Rng) -> f64 {
    // 53 high bits -> [0, 1), then shift to [-1, 1).
    let unit = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    2.0 * unit - 1.0
}

/// Uniform index in 0..n via modulo reduction (bias is negligible for the
/// desk-scale n used here and keeps the draw sequence easy to document).
pub(crate) fn index_below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    debug_assert!(n > 0);
    (rng.next_u64() % n as u64) as usize
}
