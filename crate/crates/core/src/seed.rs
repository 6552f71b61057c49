//! Deterministic fan-out of one root seed into per-component seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a stable child seed from `root` and a component tag.
pub fn derive(root: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, then mixed with the root.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(root ^ splitmix64(h))
}

/// Derives a child seed from `root` and a sequence of indices.
pub fn derive_indexed(root: u64, indices: &[u64]) -> u64 {
    indices
        .iter()
        .fold(splitmix64(root), |acc, &i| splitmix64(acc ^ splitmix64(i)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
