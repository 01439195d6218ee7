//! Poisson sampling in three regimes: inversion below 10, the rejection
//! sampler of `rand_distr` up to 1000, and a continuity-corrected normal
//! approximation above.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

pub const INVERSION_LIMIT: f64 = 10.0;
pub const NORMAL_LIMIT: f64 = 1000.0;

/// Draws one Poisson(`lambda`) variate. Non-positive means give 0.
pub fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> f64 {
    if !(lambda > 0.0) {
        0.0
    } else if lambda < INVERSION_LIMIT {
        inversion(lambda, rng)
    } else if lambda < NORMAL_LIMIT {
        Poisson::new(lambda).expect("finite positive mean").sample(rng)
    } else {
        let z: f64 = StandardNormal.sample(rng);
        (lambda + lambda.sqrt() * z + 0.5).floor().max(0.0)
    }
}

fn inversion<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let mut k = 0u32;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    while u > cdf && k < 1000 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn moments(lambda: f64, n: usize) -> (f64, f64) {
        let mut rng = substream(11, lambda.to_bits());
        let xs: Vec<f64> = (0..n).map(|_| sample_poisson(lambda, &mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        (mean, var)
    }

    #[test]
    fn moments_match_in_every_regime() {
        for lambda in [0.5, 3.0, 9.5, 10.0, 42.0, 999.0, 1000.0, 5000.0] {
            let (mean, var) = moments(lambda, 100_000);
            assert!((mean / lambda - 1.0).abs() < 0.02, "lambda {lambda} mean {mean}");
            assert!((var / mean - 1.0).abs() < 0.05, "lambda {lambda} var/mean {}", var / mean);
        }
    }

    #[test]
    fn small_mean_pmf() {
        // P(0) and P(1) at lambda = 2
        let mut rng = substream(5, 0);
        let n = 200_000;
        let mut counts = [0usize; 2];
        for _ in 0..n {
            let k = sample_poisson(2.0, &mut rng) as usize;
            if k < 2 {
                counts[k] += 1;
            }
        }
        let p0 = (-2.0f64).exp();
        assert!((counts[0] as f64 / n as f64 - p0).abs() < 0.005);
        assert!((counts[1] as f64 / n as f64 - 2.0 * p0).abs() < 0.005);
    }

    #[test]
    fn zero_mean() {
        let mut rng = substream(0, 0);
        assert_eq!(sample_poisson(0.0, &mut rng), 0.0);
    }
}
