//! Seed derivation and the random number generator used everywhere.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded from a
//! 64-bit value. Per-record seeds are derived by folding indices into a base
//! seed with the SplitMix64 finalizer, so a record's randomness depends only
//! on its coordinates and never on how work was scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable hash of a base seed and a sequence of indices.
pub fn derive(base: u64, indices: &[u64]) -> u64 {
    indices.iter().fold(mix64(base), |h, &i| mix64(h ^ mix64(i)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_at(base: u64, indices: &[u64]) -> Rng {
    rng(derive(base, indices))
}

/// Stream tags, so that unrelated consumers of one base seed never share a
/// stream.
pub mod stream {
    pub const CODE: u64 = 0xC0DE;
    pub const PARAM_SETS: u64 = 0x9A2A;
    pub const TRANSMIT: u64 = 0x7A45;
    pub const INIT_G: u64 = 0x1_6E;
    pub const INIT_D: u64 = 0x1_D0;
    pub const CRITIC: u64 = 0xC217;
    pub const GENERATOR: u64 = 0x6E7E;
    pub const OPT_INIT: u64 = 0x0917;
    pub const OPT_STEP: u64 = 0x0957;
    pub const EVAL: u64 = 0xE7A1;
    pub const HELDOUT: u64 = 0x4E1D;
}
