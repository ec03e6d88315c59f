//! Deterministic RNG derivation.
//!
//! Every random decision in a run is drawn from a [`ChaCha8Rng`] whose seed is
//! derived from the global seed plus a handful of integer coordinates (e.g.
//! iteration and batch slot). Deriving instead of sharing one stream means a
//! parallel and a serial schedule over prompts would consume identical
//! randomness, and any sub-computation can be reproduced in isolation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stable 64-bit mix of a seed and a coordinate list (FNV-1a over the words).
///
/// Not cryptographic; just a fixed, platform-independent function.
pub fn mix(seed: u64, coords: &[u64]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for &word in std::iter::once(&seed).chain(coords) {
        for byte in word.to_le_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(PRIME);
        }
    }
    h
}

/// RNG for the sub-computation identified by `coords` under `seed`.
pub fn derive_rng(seed: u64, coords: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, coords))
}
