//! Deterministic sub-seeding.
//!
//! Every stochastic operation derives its own generator from the base seed,
//! an operation tag and the indices of the task it serves. Results therefore
//! do not depend on the order in which parallel tasks run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

const fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed, a tag and a list of indices into a new 64-bit seed.
///
/// The mixing is a fixed SplitMix64 chain, so values are stable across
/// platforms and releases.
pub fn derive_seed(base: u64, tag: &str, indices: &[u64]) -> u64 {
    let mut h = splitmix(base);
    for &b in tag.as_bytes() {
        h = splitmix(h ^ u64::from(b));
    }
    // separator so ("ab", [1]) and ("a", [..]) cannot collide through bytes
    h = splitmix(h ^ 0xFF);
    for &i in indices {
        h = splitmix(h ^ i);
    }
    h
}

pub fn rng_for(base: u64, tag: &str, indices: &[u64]) -> SeededRng {
    SeededRng::seed_from_u64(derive_seed(base, tag, indices))
}
