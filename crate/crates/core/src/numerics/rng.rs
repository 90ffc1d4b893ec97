//! Reproducible random streams.
//!
//! A stream is ChaCha8 keyed by `seed` with the 64-bit ChaCha nonce set to
//! `stream_id`. ChaCha is counter-based, so every output word is a pure
//! function of `(seed, stream_id, counter)` and distinct stream ids select
//! disjoint keystreams. Replicate `i` of a Monte Carlo run always owns
//! stream `i`, whatever thread ends up running it.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};

use super::NumericsError;

/// Below this mean Poisson draws use sequential inversion; above it the
/// exact PTRS sampler from `rand_distr`. Means beyond `Poisson::MAX_LAMBDA`
/// fall back to a rounded normal approximation.
pub const POISSON_INVERSION_CUTOFF: f64 = 30.0;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    core: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut core = ChaCha8Rng::seed_from_u64(seed);
        core.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            core,
        }
    }

    /// Stream positioned at an arbitrary 32-bit word offset.
    pub fn at_counter(seed: u64, stream_id: u64, counter: u128) -> Self {
        let mut s = Self::new(seed, stream_id);
        s.core.set_word_pos(counter);
        s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.core.get_word_pos()
    }

    /// Uniform on the open interval (0, 1).
    pub fn next_uniform(&mut self) -> f64 {
        self.core.sample(Open01)
    }

    pub fn next_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.core)
    }

    pub fn next_exponential(&mut self) -> f64 {
        Exp1.sample(&mut self.core)
    }

    pub fn next_poisson(&mut self, lambda: f64) -> Result<u64, NumericsError> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(NumericsError::Domain {
                name: "lambda",
                value: lambda,
                domain: "[0, inf)",
            });
        }
        Ok(self.poisson_unchecked(lambda))
    }

    pub(crate) fn poisson_unchecked(&mut self, lambda: f64) -> u64 {
        if lambda == 0.0 {
            0
        } else if lambda < POISSON_INVERSION_CUTOFF {
            let threshold = (-lambda).exp();
            let mut n = 0u64;
            let mut prod = self.next_uniform();
            while prod > threshold {
                n += 1;
                prod *= self.next_uniform();
            }
            n
        } else if lambda < Poisson::<f64>::MAX_LAMBDA {
            let d = Poisson::new(lambda).expect("lambda checked above");
            d.sample(&mut self.core) as u64
        } else {
            let x = lambda + lambda.sqrt() * self.next_normal();
            x.max(0.0).round() as u64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_stream_repeat() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        for _ in 0..1000 {
            assert_eq!(a.next_uniform().to_bits(), b.next_uniform().to_bits());
            assert_eq!(a.next_normal().to_bits(), b.next_normal().to_bits());
        }
    }

    #[test]
    fn output_is_a_function_of_the_counter() {
        let mut a = RngStream::new(11, 5);
        for _ in 0..37 {
            a.next_normal();
        }
        let c = a.counter();
        let mut b = RngStream::at_counter(11, 5, c);
        for _ in 0..100 {
            assert_eq!(a.next_uniform().to_bits(), b.next_uniform().to_bits());
        }
    }

    #[test]
    fn distinct_streams_differ_and_look_independent() {
        let n = 100_000;
        let mut a = RngStream::new(1, 0);
        let mut b = RngStream::new(1, 1);
        let xs: Vec<f64> = (0..n).map(|_| a.next_uniform()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.next_uniform()).collect();
        assert!(xs.iter().zip(&ys).any(|(x, y)| x != y));

        // Sample correlation has standard deviation 1/sqrt(n).
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (mx, my) = (mean(&xs), mean(&ys));
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>();
        let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let corr = cov / (vx * vy).sqrt();
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "corr = {corr}");

        // Joint equidistribution on a 10x10 grid: chi-square with 99 dof.
        let mut bins = [0usize; 100];
        for (x, y) in xs.iter().zip(&ys) {
            let i = (x * 10.0) as usize;
            let j = (y * 10.0) as usize;
            bins[i * 10 + j] += 1;
        }
        let expected = n as f64 / 100.0;
        let chi2: f64 = bins
            .iter()
            .map(|&o| (o as f64 - expected).powi(2) / expected)
            .sum();
        // 99.9th percentile of chi-square(99) is about 148.
        assert!(chi2 < 148.0, "chi2 = {chi2}");
    }

    #[test]
    fn uniform_is_open() {
        let mut s = RngStream::new(0, 0);
        for _ in 0..100_000 {
            let u = s.next_uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn poisson_edge_cases() {
        let mut s = RngStream::new(2, 2);
        assert_eq!(s.next_poisson(0.0).unwrap(), 0);
        assert!(s.next_poisson(-1.0).is_err());
        assert!(s.next_poisson(f64::NAN).is_err());
        assert!(s.next_poisson(f64::INFINITY).is_err());
    }

    #[test]
    fn poisson_mean_within_clt_band() {
        // sd of the mean of 1e5 Poisson(4) draws is 2/sqrt(1e5) = 0.0063.
        let mut s = RngStream::new(42, 0);
        let n = 100_000;
        let total: u64 = (0..n).map(|_| s.next_poisson(4.0).unwrap()).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 4.0).abs() < 0.05, "mean = {mean}");
    }

    #[test]
    fn poisson_large_mean_uses_exact_sampler() {
        let mut s = RngStream::new(42, 1);
        let n = 20_000;
        let lambda = 500.0;
        let draws: Vec<f64> = (0..n).map(|_| s.next_poisson(lambda).unwrap() as f64).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!((mean - lambda).abs() < 4.0 * (lambda / n as f64).sqrt());
        assert!((var / lambda - 1.0).abs() < 0.05);
    }

    #[test]
    fn normal_moments() {
        let mut s = RngStream::new(9, 9);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| s.next_normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!(mean.abs() < 0.015);
        assert!((var - 1.0).abs() < 0.02);
    }
}
