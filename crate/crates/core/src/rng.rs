//! Seed splitting. Every replication derives its own stream from a base seed
//! and a tag path, so results do not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a sequence of stream tags.
pub fn split_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng_from(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(base: u64, tags: &[u64]) -> SimRng {
    rng_from(split_seed(base, tags))
}

// Stream tags used across modules.
pub const TAG_DATA: u64 = 1;
pub const TAG_WEIGHTS: u64 = 2;
pub const TAG_GAUSS: u64 = 3;
pub const TAG_REFERENCE: u64 = 4;
pub const TAG_PROBE: u64 = 5;
pub const TAG_POOL: u64 = 6;
