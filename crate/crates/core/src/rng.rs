//! Counter-based random-stream splitting.
//!
//! Every (day / run / appliance) gets its own generator seeded from the
//! master seed and its integer coordinates, so parallel and sequential
//! execution draw identical numbers.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domain tags, so different uses of the same coordinates never collide.
pub(crate) const STREAM_SYNTH_DAY: u64 = 0x5359_4e54_4844_4159; // "SYNTHDAY"
pub(crate) const STREAM_SIM_RUN: u64 = 0x5349_4d52_554e_0000; // "SIMRUN"

/// SplitMix64 finalizer: a cheap, well-mixed 64-bit avalanche.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic sub-seed for the stream identified by `tags`.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut state = mix64(master);
    for &tag in tags {
        state = mix64(state ^ mix64(tag));
    }
    state
}

/// Generator for one independent stream.
pub fn stream_rng(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tags))
}
