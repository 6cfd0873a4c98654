//! Seed derivation. Everything random in the pipeline is keyed off a
//! 64-bit seed mixed with a stable salt, never off thread or clock state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines a parent seed with a salt into an independent child seed.
pub fn derive(seed: u64, salt: u64) -> u64 {
    mix64(mix64(seed) ^ salt.rotate_left(17) ^ 0xA076_1D64_78BD_642F)
}

/// FNV-1a over UTF-8 bytes, for turning identifiers into salts.
pub fn str_salt(s: &str) -> u64 {
    s.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
