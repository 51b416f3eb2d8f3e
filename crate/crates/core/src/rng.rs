//! Counter-based random streams.
//!
//! Every `(seed, sample, level)` triple gets its own ChaCha8 stream, so draws
//! do not depend on the order in which samples or levels are evaluated.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for level `level` of sample number `sample`.
pub fn level_stream(seed: u64, sample: u64, level: i32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let key = splitmix64(sample ^ splitmix64(level as i64 as u64 ^ 0x5A5A_0000_0000_0000));
    rng.set_stream(key);
    rng
}

/// Stream for auxiliary draws (test functions, sign patterns) keyed by a tag.
pub fn aux_stream(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5_A5A5_A5A5_A5A5);
    rng.set_stream(splitmix64(tag));
    rng
}

/// Uniform integer in `0..bound` by rejection; `bound` must be positive.
pub fn below(rng: &mut impl RngCore, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let zone = u64::MAX - (u64::MAX - bound + 1) % bound;
    loop {
        let v = rng.next_u64();
        if v <= zone {
            return v % bound;
        }
    }
}

/// Uniform double in `[0, 1)` with 53 random bits.
pub fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform double in `[-1, 1)`.
pub fn symmetric_f64(rng: &mut impl RngCore) -> f64 {
    2.0 * unit_f64(rng) - 1.0
}

/// Fair `±1`.
pub fn sign(rng: &mut impl RngCore) -> f64 {
    if rng.next_u32() & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut r1 = level_stream(42, 3, -1);
        let mut r2 = level_stream(42, 3, -1);
        let mut r3 = level_stream(42, 3, 0);
        let mut r4 = level_stream(42, 4, -1);
        let x1 = r1.next_u64();
        assert_eq!(x1, r2.next_u64());
        assert_ne!(x1, r3.next_u64());
        assert_ne!(x1, r4.next_u64());
    }

    #[test]
    fn below_stays_in_range() {
        let mut rng = aux_stream(1, 2);
        let mut seen = [0usize; 7];
        for _ in 0..7000 {
            seen[below(&mut rng, 7) as usize] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800 && c < 1200), "{seen:?}");
        assert_eq!(below(&mut rng, 1), 0);
    }

    #[test]
    fn unit_interval() {
        let mut rng = aux_stream(9, 9);
        for _ in 0..1000 {
            let u = unit_f64(&mut rng);
            assert!((0.0..1.0).contains(&u));
        }
    }
}
