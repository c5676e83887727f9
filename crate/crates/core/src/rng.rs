//! Seeded random streams.
//!
//! Every sensor owns a stream identified by a tag; each timestep draws from
//! its own sub-stream so results never depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags for the simulator's sensors and generators.
pub mod tag {
    pub const TRACK: u64 = 0x7472_6163_6b00;
    pub const LIDAR: u64 = 0x6c69_6461_7200;
    pub const GPS: u64 = 0x6770_7300;
    pub const CAMERA: u64 = 0x6361_6d00;
    pub const PLANT: u64 = 0x706c_616e_7400;
    pub const DATASET: u64 = 0x6461_7461_0000;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a sub-seed from a base seed, a stream tag, and an index.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ tag) ^ index)
}

pub fn stream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag, index))
}
