//! The single pseudo-random generator used throughout the crate.
//!
//! All randomness (initialization, visit order, triplet sampling, synthetic
//! data) is drawn from [`Pcg64Mcg`]: the 128-bit-state multiplicative
//! congruential PCG generator with the XSL-RR output function (O'Neill,
//! "PCG: A Family of Simple Fast Space-Efficient Statistically Good
//! Algorithms for Random Number Generation", 2014). Seeding goes through
//! `SeedableRng::seed_from_u64`, which expands the `u64` seed with PCG32.

use rand_core::{Rng, SeedableRng};

pub use rand_pcg::Pcg64Mcg;

pub fn seeded(seed: u64) -> Pcg64Mcg {
    Pcg64Mcg::seed_from_u64(seed)
}

/// Uniform draw on `[0, 1)` from the top 53 bits of one 64-bit output.
#[inline]
pub fn unit_f64<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw on `[-half_width, +half_width)`.
#[inline]
pub fn symmetric_f64<R: Rng + ?Sized>(rng: &mut R, half_width: f64) -> f64 {
    half_width * (2.0 * unit_f64(rng) - 1.0)
}

/// Unbiased index in `0..n` (Lemire's widening-multiply rejection method).
pub fn index<R: Rng + ?Sized>(rng: &mut R, n: usize) -> usize {
    assert!(n > 0, "index() over an empty range");
    let n = n as u64;
    let threshold = n.wrapping_neg() % n;
    loop {
        let m = (rng.next_u64() as u128) * (n as u128);
        if (m as u64) >= threshold {
            return (m >> 64) as usize;
        }
    }
}

/// In-place Fisher-Yates shuffle driven by [`index`].
pub fn shuffle<T, R: Rng + ?Sized>(rng: &mut R, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = index(rng, i + 1);
        items.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_draws_stay_in_range() {
        let mut rng = seeded(3);
        for _ in 0..10_000 {
            let x = unit_f64(&mut rng);
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn index_is_roughly_uniform() {
        let mut rng = seeded(11);
        let mut hist = [0usize; 7];
        for _ in 0..70_000 {
            hist[index(&mut rng, 7)] += 1;
        }
        for h in hist {
            assert!((9_000..11_000).contains(&h), "{hist:?}");
        }
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut rng = seeded(5);
        let mut v: alloc::vec::Vec<u32> = (0..100).collect();
        shuffle(&mut rng, &mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<alloc::vec::Vec<_>>());
        assert_ne!(v, sorted);
    }
}
