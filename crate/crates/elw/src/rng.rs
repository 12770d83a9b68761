//! Counter-style random number streams.
//!
//! Every draw in the crate comes from a stream derived from
//! `(master seed, purpose tag, index)`, so replicates can run on any number
//! of workers in any order and still produce bit-identical results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for derived streams. Values are arbitrary but fixed; changing
/// them changes every simulated number in the crate.
pub mod tag {
    /// Data generation for one missing-data replicate.
    pub const MISSING_DATA: u64 = 0x01;
    /// Finite-population generation for one survey replicate.
    pub const POPULATION: u64 = 0x02;
    /// Design draw (Poisson / pivotal / with-replacement) for one replicate.
    pub const DESIGN: u64 = 0x03;
    /// Seed material for the nested resampling interval of one replicate.
    pub const RESAMPLE_SEED: u64 = 0x04;
    /// One subsample replicate inside the resampling interval.
    pub const SUBSAMPLE: u64 = 0x05;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Collapse `(seed, tag, index)` into a single sub-seed.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    let mut s = seed;
    let a = splitmix64(&mut s);
    let mut s2 = a ^ tag;
    let b = splitmix64(&mut s2);
    let mut s3 = b ^ index;
    splitmix64(&mut s3)
}

/// Independent RNG stream for `(seed, tag, index)`.
pub fn stream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut state = derive_seed(seed, tag, index);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
