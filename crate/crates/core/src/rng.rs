//! Deterministic random streams.
//!
//! Every simulation instance owns one ChaCha8 stream. ChaCha is a counter
//! based generator, so a stream is fully determined by its 64-bit seed and
//! independent instances can run on any thread in any order. Seeds for sweep
//! points are derived from a master seed with [`derive_seed`], which makes a
//! sweep reproducible regardless of how its jobs are scheduled.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// The random stream used by one simulation instance.
#[derive(Clone, Debug)]
pub struct SimRng(ChaCha8Rng);

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`, safe to take the logarithm of.
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        if p >= 1.0 {
            true
        } else if p <= 0.0 {
            false
        } else {
            self.uniform() < p
        }
    }

    #[inline]
    pub fn exponential(&mut self, mean: f64) -> f64 {
        -mean * libm::log(self.uniform_open())
    }

    /// Poisson variate by sequential inversion. Intended for small means.
    pub fn poisson(&mut self, mean: f64) -> u32 {
        if mean <= 0.0 {
            return 0;
        }
        let u = self.uniform();
        let mut p = libm::exp(-mean);
        let mut cdf = p;
        let mut k = 0u32;
        while u >= cdf {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
            if p == 0.0 && cdf <= u {
                // Tail below double precision; u is within rounding of 1.
                break;
            }
        }
        k
    }

    /// Number of failed Bernoulli(p) trials before the first success.
    /// `None` when `p == 0` (success never happens).
    pub fn geometric(&mut self, p: f64) -> Option<u64> {
        if p <= 0.0 {
            return None;
        }
        if p >= 1.0 {
            return Some(0);
        }
        let k = libm::floor(libm::log(self.uniform_open()) / libm::log1p(-p));
        if k >= u64::MAX as f64 {
            None
        } else {
            Some(k as u64)
        }
    }
}

/// Derives an independent seed for `(lane, index)` under `master`.
///
/// Uses the SplitMix64 finalizer over a mixed key; distinct inputs give
/// well separated outputs.
pub fn derive_seed(master: u64, lane: u64, index: u64) -> u64 {
    let mut z = splitmix(master);
    z = splitmix(z ^ lane.wrapping_mul(0xD1B5_4A32_D192_ED03));
    splitmix(z ^ index.wrapping_mul(0x8CB9_2BA7_2F3D_8DD7))
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SimRng::new(7);
        let mut b = SimRng::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn derived_seeds_differ() {
        let s: std::vec::Vec<u64> = (0..64).map(|i| derive_seed(1, 0, i)).collect();
        let mut sorted = s.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), s.len());
        assert_ne!(derive_seed(1, 0, 3), derive_seed(1, 1, 3));
        assert_ne!(derive_seed(1, 0, 3), derive_seed(2, 0, 3));
    }

    #[test]
    fn geometric_mean_matches() {
        let mut rng = SimRng::new(11);
        let p = 0.01;
        let n = 200_000;
        let sum: f64 = (0..n).map(|_| rng.geometric(p).unwrap() as f64).sum();
        let mean = sum / n as f64;
        let expected = (1.0 - p) / p;
        // sd of geometric ~ sqrt(1-p)/p ~ 99.5; se of mean ~ 0.22
        assert!((mean - expected).abs() < 1.0, "mean {mean}");
        assert_eq!(rng.geometric(0.0), None);
        assert_eq!(rng.geometric(1.0), Some(0));
    }

    #[test]
    fn poisson_mean_and_variance() {
        let mut rng = SimRng::new(3);
        let m = 0.7;
        let n = 200_000;
        let xs: std::vec::Vec<f64> = (0..n).map(|_| rng.poisson(m) as f64).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!((mean - m).abs() < 0.01, "mean {mean}");
        assert!((var - m).abs() < 0.02, "var {var}");
        assert_eq!(rng.poisson(0.0), 0);
    }

    #[test]
    fn exponential_mean() {
        let mut rng = SimRng::new(5);
        let n = 200_000;
        let mean = (0..n).map(|_| rng.exponential(2.5)).sum::<f64>() / n as f64;
        assert!((mean - 2.5).abs() < 0.03, "mean {mean}");
    }
}
