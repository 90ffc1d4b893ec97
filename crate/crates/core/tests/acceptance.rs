//! Acceptance battery. Runs without the libtest harness so every line is
//! printed: one PASS/FAIL line per criterion, then a nonzero exit if any
//! criterion failed.

mod common;

use std::time::{Duration, Instant};

use common::*;
use nlbranch::criteria::{
    apply_generator, classify, k_integral_bounds, phi, stable_k_integral,
    stable_second_order_quadrature, CriteriaConfig, InfinityBehavior, Log,
};
use nlbranch::montecarlo::{
    estimate_passage_prob, extinction_explosion_rates, sweep, sweep_csv, McConfig, PassageQuery,
    SweepPoint,
};
use nlbranch::numerics::Integrator;
use nlbranch::simulator::{CutoffMode, PathState, SimConfig, Simulator};
use nlbranch::{gamma, ModelSpec, RngStream, StableMeasure, ValidatedModel};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn within(elapsed: Duration, secs: u64) -> bool {
    elapsed < Duration::from_secs(secs)
}

fn validated(spec: ModelSpec) -> ValidatedModel {
    spec.validate().expect("acceptance specs are valid")
}

// 1. Stable integral identity, rel 1e-8 (1e-6 at alpha = 1.01, 1.99), < 5 s.
fn stable_identity() -> Outcome {
    let start = Instant::now();
    let integrator = Integrator::new(1e-12);
    let mut worst = 0.0f64;
    let mut max_rel = [0.0f64; 2];
    for (alpha, tol, slot) in [
        (1.1, 1e-8, 0),
        (1.5, 1e-8, 0),
        (1.9, 1e-8, 0),
        (1.01, 1e-6, 1),
        (1.99, 1e-6, 1),
    ] {
        for u in [1.0, 10.0, 1e3] {
            let q = stable_second_order_quadrature(&StableMeasure::new(alpha), u, &integrator)
                .expect("quadrature converges");
            let exact = gamma(alpha).unwrap() * u.powf(-alpha);
            let rel = (q - exact).abs() / exact;
            max_rel[slot] = max_rel[slot].max(rel);
            worst = worst.max(rel / tol);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1.0 && within(elapsed, 5),
        format!(
            "max rel err {:.2e} (tol 1e-8), {:.2e} at alpha 1.01/1.99 (tol 1e-6); {:.2?}",
            max_rel[0], max_rel[1], elapsed
        ),
    )
}

// 2. Lower bound <= int K_rho dmu <= upper bound (C = 1), 27 cases, < 10 s.
fn k_sandwich() -> Outcome {
    let start = Instant::now();
    let integrator = Integrator::new(1e-10);
    let mut inside = 0;
    let mut margin = f64::INFINITY;
    for alpha in [1.2, 1.5, 1.8] {
        for rho in [0.5, 1.0, 2.0] {
            for u in [10.0, 1e2, 1e4] {
                let k = stable_k_integral(&StableMeasure::new(alpha), u, rho, &integrator)
                    .expect("quadrature converges");
                let b = k_integral_bounds(alpha, u, rho).unwrap();
                if b.lower <= k && k <= b.upper {
                    inside += 1;
                }
                margin = margin.min((k / b.lower).min(b.upper / k));
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        inside == 27 && within(elapsed, 10),
        format!("{inside}/27 inside bounds, tightest ratio {margin:.3}; {elapsed:.2?}"),
    )
}

// 3. |L(ln)(u) + phi(u)| <= 1e-8 (1 + |phi|) on three critical specs, < 5 s.
fn generator_identity() -> Outcome {
    let start = Instant::now();
    let specs = [
        ("diffusion", diffusion_critical(2.0, 1.5)),
        ("jump", jump_critical(1.5, 1.5)),
        ("mixed", mixed_critical(1.0, 1.5)),
    ];
    let mut worst = 0.0f64;
    let mut max_gap = 0.0f64;
    for (_, spec) in specs {
        let m = validated(spec);
        for u in [5.0, 1e2, 1e6] {
            let l = apply_generator(&m, &Log, u).expect("generator evaluates");
            let p = phi(&m, u).unwrap();
            let gap = (l + p).abs();
            max_gap = max_gap.max(gap);
            worst = worst.max(gap / (1e-8 * (1.0 + p.abs())));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1.0 && within(elapsed, 5),
        format!("max |L ln + phi| = {max_gap:.2e} over 9 points; {elapsed:.2?}"),
    )
}

// 4. Phase diagram of the critical families, including r1 = 2 and r2 = alpha.
fn phase_table() -> Outcome {
    use InfinityBehavior::*;
    let cfg = CriteriaConfig::default();
    let mut cases: Vec<(ModelSpec, InfinityBehavior)> = Vec::new();
    for alpha in [1.2, 1.5, 1.8] {
        for (r1, want) in [(1.5, StaysInfinite), (2.0, StaysInfinite), (2.5, ComesDownFromInfinity), (3.0, ComesDownFromInfinity)] {
            cases.push((diffusion_critical(r1, alpha), want));
        }
        for (d, want) in [(-0.2, StaysInfinite), (0.0, StaysInfinite), (0.2, ComesDownFromInfinity), (0.5, ComesDownFromInfinity)] {
            cases.push((jump_critical(alpha + d, alpha), want));
        }
        // With both parts, r1 <= 2 and r2 <= alpha both reduce to r0 <= 1.
        for (r0, want) in [(0.5, StaysInfinite), (1.0, StaysInfinite), (1.2, ComesDownFromInfinity), (2.0, ComesDownFromInfinity)] {
            cases.push((mixed_critical(r0, alpha), want));
        }
    }
    let mut mismatches = 0;
    let mut inconclusive = 0;
    for (spec, want) in &cases {
        let m = validated(spec.clone());
        let r = classify(&m, &cfg).expect("classification evaluates");
        let critical = r.evidence.criticality.is_some_and(|c| c.is_critical);
        if r.infinity_behavior == Inconclusive {
            inconclusive += 1;
        }
        if r.infinity_behavior != *want
            || !critical
            || r.no_extinction != nlbranch::Verdict::Holds
            || r.no_explosion != nlbranch::Verdict::Holds
        {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!(
            "{mismatches} mismatches, {inconclusive} inconclusive over {} critical specs",
            cases.len()
        ),
    )
}

fn gbm_sim(horizon: f64) -> SimConfig {
    SimConfig {
        dt: 1e-3,
        adaptive: false,
        horizon_t: horizon,
        ..SimConfig::default()
    }
}

// 5. GBM passage probability vs the reflection formula, +-0.02, < 60 s on one thread.
fn gbm_passage() -> Outcome {
    let start = Instant::now();
    let exact = 2.0 * normal_cdf(-10f64.ln() / 8f64.sqrt());
    let mc = McConfig {
        n_paths: 10_000,
        seed: 20_240_501,
        threads: 1,
    };
    let q = PassageQuery { x0: 10.0, a: 1.0, t: 4.0 };
    let est = estimate_passage_prob(&validated(gbm()), &gbm_sim(4.0), q, &mc).unwrap();
    let elapsed = start.elapsed();
    outcome(
        (est.p_hat - exact).abs() <= 0.02 && within(elapsed, 60),
        format!(
            "p_hat {:.4} [{:.4}, {:.4}] vs exact {exact:.4}; {elapsed:.2?}",
            est.p_hat, est.ci95_low, est.ci95_high
        ),
    )
}

// 6. (a) comes down: p_hat >= 0.95; (b) stays infinite: p_hat non-increasing
//    in x0 and <= 0.01 at x0 = 1e4. 4 workers, < 5 min.
fn phase_transition() -> Outcome {
    let start = Instant::now();
    let mc = McConfig {
        n_paths: 10_000,
        seed: 77,
        threads: 4,
    };
    let cdi = validated(diffusion_critical(3.0, 1.5));
    // 1/X is a squared Bessel process of dimension 2 here: it drifts up at
    // unit rate but wanders near zero, i.e. X makes large, brief upward
    // excursions. Capped paths count as non-crossings, so a cap at 1e12
    // loses ~40% of paths; 1e100 loses <1%. The drift rule then asks for
    // steps far below the default floor, and a binding floor makes the
    // Euler drift overshoot, so the floor is lifted.
    let sim = SimConfig {
        horizon_t: 1.0,
        cap_b: 1e100,
        min_dt: 1e-300,
        ..SimConfig::default()
    };
    let down = estimate_passage_prob(&cdi, &sim, PassageQuery { x0: 1e6, a: 10.0, t: 1.0 }, &mc)
        .unwrap();
    let m = validated(gbm());
    let stays: Vec<f64> = [1e2, 1e3, 1e4]
        .iter()
        .map(|&x0| {
            estimate_passage_prob(&m, &gbm_sim(1.0), PassageQuery { x0, a: 1.0, t: 1.0 }, &mc)
                .unwrap()
                .p_hat
        })
        .collect();
    let monotone = stays.windows(2).all(|w| w[1] <= w[0]);
    let elapsed = start.elapsed();
    outcome(
        down.p_hat >= 0.95 && monotone && stays[2] <= 0.01 && within(elapsed, 300),
        format!(
            "comes-down p_hat {:.4}; stays-infinite p_hat {:?} at x0 = 1e2, 1e3, 1e4; {elapsed:.2?}",
            down.p_hat, stays
        ),
    )
}

// 7. No extinction / no explosion on critical specs; drift-only x' = x^2 hits the cap.
fn no_extinction_no_explosion() -> Outcome {
    let start = Instant::now();
    let mc = McConfig {
        n_paths: 10_000,
        seed: 5,
        threads: 4,
    };
    let diffusion = SimConfig {
        horizon_t: 10.0,
        ..gbm_sim(10.0)
    };
    let jump = SimConfig {
        eps_cut: 0.1,
        cutoff: CutoffMode::Relative,
        horizon_t: 10.0,
        ..SimConfig::default()
    };
    let d = extinction_explosion_rates(&validated(diffusion_critical(2.0, 1.5)), &diffusion, 1.0, 10.0, &mc).unwrap();
    let j = extinction_explosion_rates(&validated(jump_critical(1.5, 1.5)), &jump, 1.0, 10.0, &mc).unwrap();
    let blowup_spec = validated(ModelSpec::power_law(1.5, [(1.0, 2.0), (0.0, 0.0), (0.0, 0.0)]));
    let blowup = extinction_explosion_rates(&blowup_spec, &SimConfig { horizon_t: 2.0, ..SimConfig::default() }, 1.0, 2.0, &mc).unwrap();
    let clean = |r: &nlbranch::montecarlo::BoundaryRates| {
        r.frac_zero.successes == 0 && r.frac_capped.successes == 0 && r.budget_exhausted == 0
    };
    let elapsed = start.elapsed();
    outcome(
        clean(&d) && clean(&j) && blowup.frac_capped.successes == mc.n_paths,
        format!(
            "zero/capped: diffusion {}/{}, jump {}/{}; drift-only capped {}/{} by t = 2; {elapsed:.2?}",
            d.frac_zero.successes,
            d.frac_capped.successes,
            j.frac_zero.successes,
            j.frac_capped.successes,
            blowup.frac_capped.successes,
            mc.n_paths
        ),
    )
}

// 8. One-step compensated stable increments vs Chambers-Mallows-Stuck, KS <= 0.02.
fn stable_increment_law() -> Outcome {
    let start = Instant::now();
    let alpha = 1.5;
    let b0 = 1e-3;
    let spec = ModelSpec::power_law(alpha, [(b0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
    let m = validated(spec);
    let sim = Simulator::new(
        &m,
        SimConfig {
            dt: 1.0,
            eps_cut: 1e-4,
            cutoff: CutoffMode::Absolute,
            adaptive: false,
            ..SimConfig::default()
        },
    )
    .unwrap();
    let x = 1e6;
    let mut rng = RngStream::new(8, 0);
    let scheme: Vec<f64> = (0..10_000)
        .map(|_| sim.step_with(PathState::new(x), 1.0, &mut rng).x - x - b0)
        .collect();
    let cms = CmsSampler::new(alpha);
    let mut orng = RngStream::new(8, 1);
    let oracle: Vec<f64> = (0..200_000).map(|_| cms.sample(&mut orng)).collect();
    let d = ks_distance(scheme, oracle);
    let elapsed = start.elapsed();
    outcome(
        d <= 0.02,
        format!("KS distance {d:.4} (1e4 scheme draws, eps = 1e-4, vs 2e5 oracle draws); {elapsed:.2?}"),
    )
}

// 9. Stopped martingale residual for g = ln on the critical GBM spec.
fn martingale_residual() -> Outcome {
    let start = Instant::now();
    let m = validated(gbm());
    let sim = Simulator::new(&m, gbm_sim(1.0)).unwrap();
    let r = sim
        .martingale_residual(&Log, 10.0, 1.0, 1.0, 1e4, 10_000, 99)
        .unwrap();
    let elapsed = start.elapsed();
    outcome(
        r.residual.abs() <= 3.0 * r.stderr + 0.01,
        format!(
            "residual {:.5}, stderr {:.5} (bound {:.5}); {elapsed:.2?}",
            r.residual,
            r.stderr,
            3.0 * r.stderr + 0.01
        ),
    )
}

// 10. Sweep tables byte-identical across 1, 4 and 8 workers.
fn sweep_determinism() -> Outcome {
    let start = Instant::now();
    let alpha = 1.5;
    let sim = SimConfig {
        eps_cut: 0.1,
        horizon_t: 1.0,
        ..SimConfig::default()
    };
    let diffusion_grid: Vec<SweepPoint> = [1.5, 2.0, 2.5, 3.0]
        .iter()
        .map(|&r1| SweepPoint {
            r0: Some(r1 - 1.0),
            r1: Some(r1),
            x0: Some(100.0),
            a: Some(10.0),
            t: Some(0.5),
            ..SweepPoint::default()
        })
        .collect();
    let jump_grid: Vec<SweepPoint> = [-0.2, 0.0, 0.2, 0.5]
        .iter()
        .map(|&d| SweepPoint {
            r0: Some(1.0 + d),
            r2: Some(alpha + d),
            x0: Some(100.0),
            a: Some(10.0),
            t: Some(0.5),
            ..SweepPoint::default()
        })
        .collect();
    let tables: Vec<String> = [1, 4, 8]
        .iter()
        .map(|&threads| {
            let mc = McConfig {
                n_paths: 500,
                seed: 2024,
                threads,
            };
            let cfg = CriteriaConfig::default();
            let mut rows = sweep(&diffusion_critical(2.0, alpha), &diffusion_grid, &sim, &cfg, &mc);
            rows.extend(sweep(&jump_critical(alpha, alpha), &jump_grid, &sim, &cfg, &mc));
            sweep_csv(&rows)
        })
        .collect();
    let identical = tables.windows(2).all(|w| w[0] == w[1]);
    let flagged = tables[0].contains(",invalid,");
    let elapsed = start.elapsed();
    outcome(
        identical && !flagged,
        format!(
            "{} rows, identical across 1/4/8 workers: {identical}; {elapsed:.2?}",
            tables[0].lines().count() - 1
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("stable integral identity", stable_identity),
        ("K-integral sandwich", k_sandwich),
        ("generator identity", generator_identity),
        ("phase diagram", phase_table),
        ("GBM passage oracle", gbm_passage),
        ("phase-transition behavior", phase_transition),
        ("no extinction / no explosion", no_extinction_no_explosion),
        ("stable increment distribution", stable_increment_law),
        ("martingale residual", martingale_residual),
        ("sweep determinism", sweep_determinism),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.passed {
            failures += 1;
        }
        println!(
            "acceptance {:>2} {:<30} {}  {}",
            i + 1,
            name,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
