//! Deterministic random streams.
//!
//! Every random decision (initialization, sample order, dropout masks) draws
//! from a ChaCha8 stream whose seed is a pure function of the run seed and a
//! few stream coordinates, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a generator from a base seed and stream coordinates.
pub fn stream(seed: u64, coords: &[u64]) -> Rng {
    let mut state = splitmix64(seed);
    for &c in coords {
        state = splitmix64(state ^ splitmix64(c.wrapping_add(0x51_7cc1_b727_220a)));
    }
    ChaCha8Rng::seed_from_u64(state)
}

/// Derives a 64-bit seed from a base seed and stream coordinates.
pub fn derive_seed(seed: u64, coords: &[u64]) -> u64 {
    use rand::RngCore;
    stream(seed, coords).next_u64()
}
