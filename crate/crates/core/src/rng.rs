//! Seeded random streams.
//!
//! Every stochastic component draws from a [`ChaCha8Rng`] derived from a
//! 64-bit seed and a stream id, so that fire evolution, spawn poses and
//! controller randomness stay independent and reproducible.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as SimRng;

/// Well-known stream ids.
pub mod stream {
    pub const FIRE: u64 = 1;
    pub const SPAWN: u64 = 2;
    pub const CONTROLLER: u64 = 3;
    pub const TRAINING: u64 = 4;
    pub const INIT: u64 = 5;
}

pub fn rng_for(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer; used to derive per-episode seeds from a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
