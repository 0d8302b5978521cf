//! Named seed sub-streams.
//!
//! Every random consumer derives its own seed from a single global seed and a
//! stream name, so adding draws to one consumer never shifts another's
//! sequence. Generators are ChaCha8, which is platform independent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_TERRAIN: &str = "terrain";
pub const STREAM_NOISE: &str = "noise";
pub const STREAM_PLANNER: &str = "planner";
pub const STREAM_SCHEDULER: &str = "scheduler";
pub const STREAM_ODOMETRY: &str = "odometry";

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Seed for the named sub-stream of `global`.
pub fn derive(global: u64, stream: &str) -> u64 {
    mix64(global ^ mix64(fnv1a(stream.as_bytes())))
}

/// Seed for item `index` of the named sub-stream (episode, frame, ...).
pub fn derive_indexed(global: u64, stream: &str, index: u64) -> u64 {
    mix64(derive(global, stream) ^ mix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
