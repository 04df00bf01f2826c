//! Counter-based draws keyed by (seed, string key).
//!
//! The value depends only on the seed, the key bytes and the counter, so it can
//! be reproduced in any language: FNV-1a 64 over the key, mixed with the seed
//! and counter through the SplitMix64 finalizer.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// The `counter`-th 64-bit draw for `(seed, key)`.
pub fn keyed_u64(seed: u64, key: &str, counter: u64) -> u64 {
    splitmix64(splitmix64(seed ^ fnv1a64(key.as_bytes())).wrapping_add(counter))
}

/// Uniform index in `0..n` from one keyed draw (multiply-shift reduction).
pub fn keyed_index(seed: u64, key: &str, n: usize) -> usize {
    assert!(n > 0, "cannot draw from an empty range");
    ((keyed_u64(seed, key, 0) as u128 * n as u128) >> 64) as usize
}
