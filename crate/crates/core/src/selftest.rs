//! Release-gate battery: analytic identities, bound checks, generator
//! consistency, phase table and stream determinism.

use serde::{Deserialize, Serialize};

use crate::criteria::{
    apply_generator, classify, k_integral_bounds, phi, stable_k_integral,
    stable_second_order_quadrature, CriteriaConfig, InfinityBehavior, Log,
};
use crate::error::Result;
use crate::model::{ModelSpec, StableMeasure, ValidatedModel};
use crate::montecarlo::run_replicates;
use crate::numerics::{gamma, Integrator, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Largest violation ratio seen (`<= 1` passes) or mismatch count.
    pub worst: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

/// Knobs for checking that the battery can fail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelftestOptions {
    /// Multiplies the stable constant in the identity check.
    pub c_alpha_scale: f64,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self { c_alpha_scale: 1.0 }
    }
}

pub fn run_selftest() -> SelftestReport {
    run_selftest_with(SelftestOptions::default())
}

pub fn run_selftest_with(opts: SelftestOptions) -> SelftestReport {
    let checks = vec![
        capture("stable_identity", || identity_check(opts)),
        capture("k_integral_sandwich", sandwich_check),
        capture("generator_consistency", generator_check),
        capture("phase_table", phase_check),
        capture("rng_determinism", rng_check),
    ];
    SelftestReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

fn capture(name: &str, f: impl FnOnce() -> Result<(f64, String)>) -> CheckResult {
    match f() {
        Ok((worst, detail)) => CheckResult {
            name: name.to_string(),
            passed: worst <= 1.0,
            worst,
            detail,
        },
        Err(e) => CheckResult {
            name: name.to_string(),
            passed: false,
            worst: f64::INFINITY,
            detail: format!("evaluation failed: {e}"),
        },
    }
}

fn identity_check(opts: SelftestOptions) -> Result<(f64, String)> {
    let integrator = Integrator::new(1e-12);
    let cases = [(1.1, 1e-8), (1.5, 1e-8), (1.9, 1e-8), (1.01, 1e-6), (1.99, 1e-6)];
    let mut worst = 0.0f64;
    let mut max_rel = 0.0f64;
    for (alpha, tol) in cases {
        let mu = StableMeasure::new(alpha);
        for u in [1.0, 10.0, 1e3] {
            let q = opts.c_alpha_scale * stable_second_order_quadrature(&mu, u, &integrator)?;
            let exact = gamma(alpha)? * u.powf(-alpha);
            let rel = (q - exact).abs() / exact;
            max_rel = max_rel.max(rel);
            worst = worst.max(rel / tol);
        }
    }
    Ok((worst, format!("max relative error {max_rel:.3e}")))
}

fn sandwich_check() -> Result<(f64, String)> {
    let integrator = Integrator::new(1e-10);
    let mut violations = 0;
    let mut tightest = f64::INFINITY;
    for alpha in [1.2, 1.5, 1.8] {
        let mu = StableMeasure::new(alpha);
        for rho in [0.5, 1.0, 2.0] {
            for u in [10.0, 1e2, 1e4] {
                let k = stable_k_integral(&mu, u, rho, &integrator)?;
                let b = k_integral_bounds(alpha, u, rho)?;
                if !(b.lower <= k && k <= b.upper) {
                    violations += 1;
                }
                tightest = tightest.min((k / b.lower).min(b.upper / k));
            }
        }
    }
    Ok((
        violations as f64,
        format!("{violations} of 27 outside bounds; smallest margin ratio {tightest:.3}"),
    ))
}

/// Critical power-law models: diffusion only, jumps only, and both.
pub fn critical_models() -> Result<Vec<(&'static str, ValidatedModel)>> {
    let alpha = 1.5;
    let g = gamma(alpha)?;
    Ok(vec![
        (
            "diffusion",
            ModelSpec::power_law(alpha, [(1.0, 1.0), (2.0, 2.0), (0.0, 0.0)]).validate()?,
        ),
        (
            "jump",
            ModelSpec::power_law(alpha, [(g, 1.0), (0.0, 0.0), (1.0, alpha)]).validate()?,
        ),
        (
            "mixed",
            ModelSpec::power_law(alpha, [(0.5 + g, 1.0), (1.0, 2.0), (1.0, alpha)]).validate()?,
        ),
    ])
}

fn generator_check() -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    let mut max_abs = 0.0f64;
    for (_, model) in critical_models()? {
        for u in [5.0, 1e2, 1e6] {
            let l = apply_generator(&model, &Log, u)?;
            let p = phi(&model, u)?;
            let gap = (l + p).abs();
            max_abs = max_abs.max(gap);
            worst = worst.max(gap / (1e-8 * (1.0 + p.abs())));
        }
    }
    Ok((worst, format!("max |L ln + phi| = {max_abs:.3e}")))
}

/// The verdict table on critical families, with the expected
/// behaviour for each `(r1, r2 - alpha)` cell.
pub fn phase_cases() -> Result<Vec<(ModelSpec, InfinityBehavior)>> {
    use InfinityBehavior::*;
    let alpha = 1.5;
    let g = gamma(alpha)?;
    // r0 fixes r1 = r0 + 1 and r2 = r0 + alpha - 1.
    let family = |r0: f64, b1: f64, b2: f64| {
        ModelSpec::power_law(
            alpha,
            [(0.5 * b1 + g * b2, r0), (b1, r0 + 1.0), (b2, r0 + alpha - 1.0)],
        )
    };
    Ok(vec![
        (family(0.5, 2.0, 0.0), StaysInfinite),
        (family(1.0, 2.0, 0.0), StaysInfinite),
        (family(1.5, 2.0, 0.0), ComesDownFromInfinity),
        (family(0.5, 0.0, 1.0), StaysInfinite),
        (family(1.0, 0.0, 1.0), StaysInfinite),
        (family(1.5, 0.0, 1.0), ComesDownFromInfinity),
        // Both present: r1 <= 2 and r2 <= alpha together, or either above.
        (family(0.5, 1.0, 1.0), StaysInfinite),
        (family(1.0, 1.0, 1.0), StaysInfinite),
        (family(1.5, 1.0, 1.0), ComesDownFromInfinity),
        (family(3.0, 1.0, 1.0), ComesDownFromInfinity),
    ])
}

fn phase_check() -> Result<(f64, String)> {
    let cfg = CriteriaConfig::default();
    let cases = phase_cases()?;
    let mut mismatches = 0;
    for (spec, expected) in &cases {
        let report = classify(&spec.clone().validate()?, &cfg)?;
        if report.infinity_behavior != *expected {
            mismatches += 1;
        }
    }
    Ok((
        mismatches as f64,
        format!("{mismatches} mismatches over {} critical specs", cases.len()),
    ))
}

fn rng_check() -> Result<(f64, String)> {
    let draw = |s: &mut RngStream| (0..64).map(|_| s.next_uniform()).collect::<Vec<_>>();
    let same = draw(&mut RngStream::new(2024, 3)) == draw(&mut RngStream::new(2024, 3));
    let distinct = draw(&mut RngStream::new(2024, 3)) != draw(&mut RngStream::new(2024, 4));
    let f = |_, s: &mut RngStream| Ok(s.next_normal());
    let serial = run_replicates(256, 99, 1, f)?;
    let pooled = run_replicates(256, 99, 4, f)?;
    let ok = same && distinct && serial == pooled;
    Ok((
        if ok { 0.0 } else { 2.0 },
        format!("repeatable {same}, streams distinct {distinct}, thread-invariant {}", serial == pooled),
    ))
}
