//! Deterministic seed fan-out.
//!
//! Every experiment is driven by one master seed. Child seeds are derived by a
//! counter-based rule: `derive(master, stream, index)` hashes the three words
//! through SplitMix64 finalizers, so any (stream, index) pair can be
//! regenerated independently of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers used by the sweeps.
pub mod stream {
    pub const UNITARY: u64 = 1;
    pub const SAMPLE_P: u64 = 2;
    pub const SAMPLE_Q: u64 = 3;
    pub const PERMUTATION: u64 = 4;
    pub const DISCRETE_PAIR: u64 = 5;
    pub const REPLICATE: u64 = 6;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
