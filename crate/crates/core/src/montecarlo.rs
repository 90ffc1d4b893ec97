//! Replicated simulation: passage probabilities, extinction and explosion
//! frequencies, and parameter sweeps.
//!
//! Replicate `i` always draws from stream `(seed, i)` and results are
//! reduced in index order, so every estimate depends on the seed and the
//! configuration only, never on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{classify, CriteriaConfig, InfinityBehavior};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, RateFunction, StableMeasure};
use crate::numerics::RngStream;
use crate::simulator::{PassageRecord, SimConfig, Simulator};
use crate::ValidatedModel;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

pub const MIN_PASSAGE_PATHS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: u64,
    pub seed: u64,
    /// Worker threads; 0 lets the pool pick.
    pub threads: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            seed: 1,
            threads: 0,
        }
    }
}

/// A binomial proportion with its Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub p_hat: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub successes: u64,
    pub n: u64,
}

impl Proportion {
    pub fn wilson(successes: u64, n: u64) -> Self {
        assert!(n > 0 && successes <= n, "need 0 <= successes <= n, n > 0");
        let nf = n as f64;
        let p = successes as f64 / nf;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / nf;
        let center = (p + z2 / (2.0 * nf)) / denom;
        let half = Z95 / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
        Self {
            p_hat: p,
            ci95_low: (center - half).max(0.0).min(p),
            ci95_high: (center + half).min(1.0).max(p),
            successes,
            n,
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci95_low <= p && p <= self.ci95_high
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassageQuery {
    pub x0: f64,
    pub a: f64,
    pub t: f64,
}

/// Estimate of `P_x0{tau_a^- < t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassageEstimate {
    pub p_hat: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub n_paths: u64,
    pub query: PassageQuery,
    /// Paths that reached the cap first; counted as non-crossings.
    pub capped: u64,
    /// Paths stopped by the step budget; counted as non-crossings.
    pub budget_exhausted: u64,
}

/// Run `f(i, stream_i)` for `i in 0..n` on a pool of `threads` workers,
/// returning results in index order.
pub fn run_replicates<T, F>(n: u64, seed: u64, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut RngStream) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Precondition(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| f(i, &mut RngStream::new(seed, i)))
            .collect()
    })
}

fn check_paths(n: u64) -> Result<()> {
    if n < MIN_PASSAGE_PATHS {
        return Err(Error::Precondition(format!(
            "n_paths = {n}; at least {MIN_PASSAGE_PATHS} are required"
        )));
    }
    Ok(())
}

pub fn estimate_passage_prob(
    model: &ValidatedModel,
    sim: &SimConfig,
    query: PassageQuery,
    mc: &McConfig,
) -> Result<PassageEstimate> {
    check_paths(mc.n_paths)?;
    let PassageQuery { x0, a, t } = query;
    if !(a > 0.0 && a < x0) {
        return Err(Error::Precondition(format!("need 0 < a < x0, got a = {a}, x0 = {x0}")));
    }
    if !(t > 0.0 && t <= sim.horizon_t) {
        return Err(Error::Precondition(format!(
            "need 0 < t <= horizon_t = {}, got t = {t}",
            sim.horizon_t
        )));
    }
    let simulator = Simulator::new(model, sim.clone())?;
    let records = run_replicates(mc.n_paths, mc.seed, mc.threads, |_, rng| {
        simulator.simulate_with(x0, a, sim.cap_b, t, rng, |_, _| {})
    })?;
    let hits = records.iter().filter(|r| r.tau_a_minus.is_some()).count() as u64;
    let capped = records
        .iter()
        .filter(|r| r.capped_at.is_some() && r.tau_a_minus.is_none())
        .count() as u64;
    let prop = Proportion::wilson(hits, mc.n_paths);
    Ok(PassageEstimate {
        p_hat: prop.p_hat,
        ci95_low: prop.ci95_low,
        ci95_high: prop.ci95_high,
        n_paths: mc.n_paths,
        query,
        capped,
        budget_exhausted: count_exhausted(&records),
    })
}

fn count_exhausted(records: &[PassageRecord]) -> u64 {
    records.iter().filter(|r| r.budget_exhausted).count() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRates {
    pub x0: f64,
    pub horizon: f64,
    pub frac_zero: Proportion,
    pub frac_capped: Proportion,
    pub budget_exhausted: u64,
}

/// Fractions of paths absorbed at zero and reaching the cap by `horizon`.
pub fn extinction_explosion_rates(
    model: &ValidatedModel,
    sim: &SimConfig,
    x0: f64,
    horizon: f64,
    mc: &McConfig,
) -> Result<BoundaryRates> {
    if mc.n_paths == 0 {
        return Err(Error::Precondition("n_paths must be positive".into()));
    }
    if !(x0 > 0.0 && x0 < sim.cap_b) {
        return Err(Error::Precondition(format!("need 0 < x0 < cap_b, got x0 = {x0}")));
    }
    let cfg = SimConfig {
        horizon_t: horizon,
        ..sim.clone()
    };
    let simulator = Simulator::new(model, cfg)?;
    let records = run_replicates(mc.n_paths, mc.seed, mc.threads, |_, rng| {
        simulator.simulate_with(x0, 0.0, sim.cap_b, horizon, rng, |_, _| {})
    })?;
    let zero = records.iter().filter(|r| r.tau_zero.is_some()).count() as u64;
    let capped = records.iter().filter(|r| r.capped_at.is_some()).count() as u64;
    Ok(BoundaryRates {
        x0,
        horizon,
        frac_zero: Proportion::wilson(zero, mc.n_paths),
        frac_capped: Proportion::wilson(capped, mc.n_paths),
        budget_exhausted: count_exhausted(&records),
    })
}

/// One sweep point. Missing model parameters are taken from the power-law
/// template; the passage query must be complete.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepPoint {
    pub r0: Option<f64>,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    pub alpha: Option<f64>,
    pub b0: Option<f64>,
    pub b1: Option<f64>,
    pub b2: Option<f64>,
    pub x0: Option<f64>,
    pub a: Option<f64>,
    pub t: Option<f64>,
}

/// Fully resolved parameters of a sweep row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    pub alpha: f64,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub x0: f64,
    pub a: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub params: Option<SweepParams>,
    pub predicted: Option<InfinityBehavior>,
    pub estimate: Option<PassageEstimate>,
    /// Behaviour the estimate is consistent with; finite grids can support
    /// the limit statements but never prove them.
    pub observed: Option<String>,
    pub seed: u64,
    pub error: Option<String>,
}

impl SweepPoint {
    fn resolve(&self, template: &ModelSpec) -> Result<(ModelSpec, SweepParams)> {
        let (Some((b0, r0)), Some((b1, r1)), Some((b2, r2))) = (
            template.a0.as_power_law(),
            template.a1.as_power_law(),
            template.a2.as_power_law(),
        ) else {
            return Err(Error::Precondition("sweep template must use power-law rates".into()));
        };
        let missing = |name: &str| Error::Precondition(format!("sweep point lacks {name}"));
        let p = SweepParams {
            r0: self.r0.unwrap_or(r0),
            r1: self.r1.unwrap_or(r1),
            r2: self.r2.unwrap_or(r2),
            alpha: self.alpha.unwrap_or(template.mu.alpha),
            b0: self.b0.unwrap_or(b0),
            b1: self.b1.unwrap_or(b1),
            b2: self.b2.unwrap_or(b2),
            x0: self.x0.ok_or_else(|| missing("x0"))?,
            a: self.a.ok_or_else(|| missing("a"))?,
            t: self.t.ok_or_else(|| missing("t"))?,
        };
        let spec = ModelSpec {
            a0: RateFunction::power(p.b0, p.r0),
            a1: RateFunction::power(p.b1, p.r1),
            a2: RateFunction::power(p.b2, p.r2),
            a3: template.a3.clone(),
            mu: StableMeasure {
                alpha: p.alpha,
                support: template.mu.support,
            },
            nu: template.nu.clone(),
        };
        Ok((spec, p))
    }
}

/// Label for an estimate of `P_x{tau_a^- < t}` with `x` well above `a`.
pub fn observed_label(est: &PassageEstimate) -> &'static str {
    if est.ci95_high < 0.5 {
        "consistent with stays_infinite"
    } else if est.ci95_low > 0.5 {
        "consistent with comes_down_from_infinity"
    } else {
        "inconclusive"
    }
}

/// One row per grid point, in grid order. Points that fail to resolve,
/// validate, classify or simulate yield a flagged row instead of an error.
pub fn sweep(
    template: &ModelSpec,
    grid: &[SweepPoint],
    sim: &SimConfig,
    criteria: &CriteriaConfig,
    mc: &McConfig,
) -> Vec<SweepRow> {
    grid.iter()
        .enumerate()
        .map(|(index, point)| {
            let mut row = SweepRow {
                index,
                params: None,
                predicted: None,
                estimate: None,
                observed: None,
                seed: mc.seed,
                error: None,
            };
            if let Err(e) = fill_row(&mut row, template, point, sim, criteria, mc) {
                row.error = Some(e.to_string());
            }
            row
        })
        .collect()
}

fn fill_row(
    row: &mut SweepRow,
    template: &ModelSpec,
    point: &SweepPoint,
    sim: &SimConfig,
    criteria: &CriteriaConfig,
    mc: &McConfig,
) -> Result<()> {
    let (spec, params) = point.resolve(template)?;
    row.params = Some(params);
    let model = spec.validate()?;
    row.predicted = Some(classify(&model, criteria)?.infinity_behavior);
    let cfg = SimConfig {
        horizon_t: sim.horizon_t.max(params.t),
        ..sim.clone()
    };
    let query = PassageQuery {
        x0: params.x0,
        a: params.a,
        t: params.t,
    };
    let est = estimate_passage_prob(&model, &cfg, query, mc)?;
    row.observed = Some(observed_label(&est).to_string());
    row.estimate = Some(est);
    Ok(())
}

pub const SWEEP_CSV_HEADER: &str =
    "r0,r1,r2,alpha,b0,b1,b2,x0,a,t,predicted,p_hat,ci_low,ci_high,n_paths,seed";

fn behavior_label(b: InfinityBehavior) -> &'static str {
    match b {
        InfinityBehavior::StaysInfinite => "stays_infinite",
        InfinityBehavior::ComesDownFromInfinity => "comes_down_from_infinity",
        InfinityBehavior::Inconclusive => "inconclusive",
    }
}

/// CSV table with [`SWEEP_CSV_HEADER`]; flagged rows carry `invalid` as the
/// prediction and empty estimate fields. Floats use shortest round-trip
/// formatting.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in rows {
        let p = row.params;
        let field = |f: fn(&SweepParams) -> f64| opt(p.as_ref().map(f));
        let predicted = match (&row.error, row.predicted) {
            (None, Some(b)) => behavior_label(b),
            _ => "invalid",
        };
        let est = row.estimate;
        let cols = [
            field(|p| p.r0),
            field(|p| p.r1),
            field(|p| p.r2),
            field(|p| p.alpha),
            field(|p| p.b0),
            field(|p| p.b1),
            field(|p| p.b2),
            field(|p| p.x0),
            field(|p| p.a),
            field(|p| p.t),
            predicted.to_string(),
            opt(est.map(|e| e.p_hat)),
            opt(est.map(|e| e.ci95_low)),
            opt(est.map(|e| e.ci95_high)),
            est.map(|e| e.n_paths.to_string()).unwrap_or_default(),
            row.seed.to_string(),
        ];
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}
