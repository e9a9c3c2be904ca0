//! Seeding conventions.
//!
//! Every randomized operation takes an explicit `u64` seed and builds its own
//! [`ChaCha8Rng`]. Sub-tasks never share a stream: they derive a child seed
//! with [`derive_seed`], a SplitMix64 finalizer over `(parent, tag)`. The
//! derivation depends only on the two integers, so results do not change
//! with the order or thread on which sub-tasks run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for sub-task `tag` of a job seeded with `parent`.
pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Child seed keyed by a string label (stage names, dataset ids).
pub fn derive_seed_str(parent: u64, label: &str) -> u64 {
    // FNV-1a; stable across platforms and Rust versions, unlike `DefaultHasher`.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    derive_seed(parent, h)
}
