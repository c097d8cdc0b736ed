//! Deterministic derivation of independent sub-seeds.

/// SplitMix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for stream `tag` under `seed`. Distinct tags give unrelated seeds.
pub fn derive(seed: u64, tag: u64) -> u64 {
    mix64(mix64(seed) ^ mix64(tag.wrapping_mul(0xD1B5_4A32_D192_ED03)))
}

pub mod tag {
    pub const DATA: u64 = 1;
    pub const PROJECTION: u64 = 2;
    pub const PERMUTATION: u64 = 3;
    pub const STATES: u64 = 4;
    pub const NOISE: u64 = 5;
    pub const EPISODE: u64 = 6;
    pub const TASK_CHOICE: u64 = 7;
    pub const INIT: u64 = 8;
}
