//! Oracles shared by the integration tests. Nothing here calls into the
//! simulator; the samplers and reference formulas are independent of it.
#![allow(dead_code)]

use nlbranch::{gamma, ModelSpec, RngStream};
use std::f64::consts::{FRAC_PI_2, PI};

/// Chambers-Mallows-Stuck draw of a totally skewed (beta = 1) stable law
/// with characteristic exponent `(-i theta)^alpha`, i.e. the time-one law
/// of the compensated Levy process with measure
/// `alpha (alpha - 1) / Gamma(2 - alpha) z^(-1-alpha) dz`, `1 < alpha < 2`.
pub struct CmsSampler {
    alpha: f64,
    b: f64,
    s: f64,
    sigma: f64,
}

impl CmsSampler {
    pub fn new(alpha: f64) -> Self {
        let t = (PI * alpha / 2.0).tan();
        Self {
            alpha,
            b: t.atan() / alpha,
            s: (1.0 + t * t).powf(1.0 / (2.0 * alpha)),
            // Scale parameter: sigma^alpha = -cos(pi alpha / 2).
            sigma: (-(PI * alpha / 2.0).cos()).powf(1.0 / alpha),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let a = self.alpha;
        let v = PI * (rng.next_uniform() - 0.5);
        let w = rng.next_exponential();
        let x = self.s * (a * (v + self.b)).sin() / v.cos().powf(1.0 / a)
            * ((v - a * (v + self.b)).cos() / w).powf((1.0 - a) / a);
        debug_assert!(v.abs() < FRAC_PI_2);
        self.sigma * x
    }
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_distance(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Standard normal CDF via statrs.
pub fn normal_cdf(x: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().cdf(x)
}

/// `dX = X dt + sqrt(2) X dW`: `ln X` is `sqrt(2)` times a Brownian motion.
pub fn gbm() -> ModelSpec {
    ModelSpec::power_law(1.5, [(1.0, 1.0), (2.0, 2.0), (0.0, 0.0)])
}

/// Critical diffusion family with `r1 = r0 + 1`, `b0 = 1`, `b1 = 2`.
pub fn diffusion_critical(r1: f64, alpha: f64) -> ModelSpec {
    ModelSpec::power_law(alpha, [(1.0, r1 - 1.0), (2.0, r1), (0.0, 0.0)])
}

/// Critical pure-jump family with `r2 = r0 + alpha - 1`, `b2 = 1`.
pub fn jump_critical(r2: f64, alpha: f64) -> ModelSpec {
    let g = gamma(alpha).unwrap();
    ModelSpec::power_law(alpha, [(g, r2 - alpha + 1.0), (0.0, 0.0), (1.0, r2)])
}

/// Critical family with both parts, `b1 = 2`, `b2 = 1`.
pub fn mixed_critical(r0: f64, alpha: f64) -> ModelSpec {
    let g = gamma(alpha).unwrap();
    ModelSpec::power_law(
        alpha,
        [(1.0 + g, r0), (2.0, r0 + 1.0), (1.0, r0 + alpha - 1.0)],
    )
}
