//! Seed derivation for independent deterministic RNG streams.
//!
//! Every source of randomness in the crate flows from one master seed.
//! Sub-tasks (products, trials, epochs) get their own stream via
//! [`derive_seed`] so results do not depend on execution order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; full-period mixing of a 64-bit state.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a stream identifier.
///
/// Distinct `stream` values give statistically independent streams;
/// the mapping is stable across platforms and releases.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut state = master;
    let a = splitmix64(&mut state);
    let mut state = a ^ stream;
    splitmix64(&mut state)
}

/// Seeded RNG used throughout the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// FNV-1a hash of arbitrary bytes, for deriving stable per-series streams
/// from identifiers rather than list positions.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
