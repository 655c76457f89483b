//! Deterministic stream derivation.
//!
//! Every random stream in an experiment is keyed by a tuple of integers and
//! hashed into a 64-bit seed, so results do not depend on the order in which
//! replications are executed. The per-arc draw streams used in streaming mode
//! are counter based: the bit for the `j`th observation of arc `e` is a pure
//! function of `(key, e, j)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every seeded stream in the crate.
pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a tuple of words.
pub fn hash64(parts: &[u64]) -> u64 {
    let mut h = mix64(GOLDEN ^ parts.len() as u64);
    for (i, &p) in parts.iter().enumerate() {
        h = mix64(h ^ mix64(p.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1))));
    }
    h
}

/// FNV-1a, used to turn stream names into key words.
pub fn label(name: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in name.as_bytes() {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// A seeded generator for the stream identified by `parts`.
pub fn stream(parts: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(hash64(parts))
}

/// Uniform double in `[0, 1)` derived from a key.
#[inline]
pub fn unit_f64(key: u64) -> f64 {
    (mix64(key) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_order_sensitive() {
        assert_ne!(hash64(&[1, 2]), hash64(&[2, 1]));
        assert_ne!(hash64(&[1]), hash64(&[1, 0]));
        assert_eq!(hash64(&[7, 3, 9]), hash64(&[7, 3, 9]));
    }

    #[test]
    fn unit_f64_is_roughly_uniform() {
        let n = 100_000;
        let mean = (0..n).map(|i| unit_f64(hash64(&[42, i]))).sum::<f64>() / n as f64;
        // sd of the mean is sqrt(1/12 / n) ~ 0.0009
        assert!((mean - 0.5).abs() < 0.003, "mean {mean}");
    }
}
