//! Counter-based hashing for order-independent randomness.
//!
//! Each random decision is a pure function of `(seed, counter...)`, so the
//! outcome for one cell or ray never depends on which others were evaluated
//! first or on which thread.

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a seed with a sequence of counters.
#[inline]
pub fn hash_counters(seed: u64, counters: &[u64]) -> u64 {
    counters
        .iter()
        .fold(splitmix64(seed), |h, &c| splitmix64(h ^ c))
}

/// Maps a 64-bit hash to `[0, 1)` using its top 53 bits.
#[inline]
pub fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Uniform draw in `[0, 1)` for BEV cell `(ix, iy)` under `seed`.
#[inline]
pub fn cell_uniform(seed: u64, ix: usize, iy: usize) -> f64 {
    unit_f64(hash_counters(seed, &[ix as u64, iy as u64]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_range() {
        for i in 0..10_000u64 {
            let u = unit_f64(splitmix64(i));
            assert!((0.0..1.0).contains(&u));
        }
        assert_eq!(unit_f64(u64::MAX), ((1u64 << 53) - 1) as f64 / (1u64 << 53) as f64);
    }

    #[test]
    fn counters_are_not_symmetric() {
        assert_ne!(cell_uniform(7, 1, 2), cell_uniform(7, 2, 1));
        assert_ne!(cell_uniform(7, 1, 2), cell_uniform(8, 1, 2));
        assert_eq!(cell_uniform(7, 1, 2), cell_uniform(7, 1, 2));
    }

    #[test]
    fn roughly_uniform() {
        let n = 100_000;
        let mean = (0..n).map(|i| cell_uniform(3, i, i / 7)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }
}
