//! Euler scheme for the branching SDE.
//!
//! Stable jumps above a cutoff `eps` are simulated exactly as a compound
//! Poisson stream of Pareto variables; jumps below it are replaced by a
//! Gaussian of matching variance, and the compensator of the large jumps
//! enters as drift. Intensities are frozen at the left end of each step.
//! Zero and the cap `B` are absorbing.

use serde::{Deserialize, Serialize};

use crate::criteria::{apply_generator, TestFunction};
use crate::error::{Error, Result};
use crate::model::{stable_constant, Support, ValidatedModel};
use crate::numerics::RngStream;

/// Default floor on adaptive steps.
pub const MIN_ADAPTIVE_DT: f64 = 1e-9;
/// Target for relative drift and expected jump count per adaptive step.
const ADAPTIVE_FRACTION: f64 = 0.01;

/// How `SimConfig::eps_cut` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffMode {
    /// `eps = eps_cut`.
    Absolute,
    /// `eps = eps_cut * X`, re-evaluated every step.
    Relative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub eps_cut: f64,
    pub cutoff: CutoffMode,
    pub cap_b: f64,
    pub floor_zero: f64,
    pub horizon_t: f64,
    pub adaptive: bool,
    /// Floor on adaptive steps. Below `0.01 x / a0(x)` the Euler drift
    /// term overshoots, so a floor that binds can manufacture explosions.
    pub min_dt: f64,
    /// Per-path step budget; a path that exhausts it stops early and is
    /// flagged.
    pub max_steps: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            eps_cut: 1e-2,
            cutoff: CutoffMode::Relative,
            cap_b: 1e12,
            floor_zero: 0.0,
            horizon_t: 1.0,
            adaptive: true,
            min_dt: MIN_ADAPTIVE_DT,
            max_steps: 100_000_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain {
                    name,
                    value: v,
                    domain: "(0, inf)",
                })
            }
        };
        positive("dt", self.dt)?;
        positive("eps_cut", self.eps_cut)?;
        positive("cap_b", self.cap_b)?;
        positive("horizon_t", self.horizon_t)?;
        positive("min_dt", self.min_dt)?;
        if !(self.floor_zero >= 0.0) || self.floor_zero >= self.cap_b {
            return Err(Error::Domain {
                name: "floor_zero",
                value: self.floor_zero,
                domain: "[0, cap_b)",
            });
        }
        if self.max_steps == 0 {
            return Err(Error::Precondition("max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathState {
    pub t: f64,
    pub x: f64,
    pub absorbed_zero: bool,
    pub capped: bool,
}

impl PathState {
    pub fn new(x: f64) -> Self {
        Self {
            t: 0.0,
            x,
            absorbed_zero: false,
            capped: false,
        }
    }

    pub fn is_frozen(&self) -> bool {
        self.absorbed_zero || self.capped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassageRecord {
    pub tau_a_minus: Option<f64>,
    pub tau_b_plus: Option<f64>,
    pub tau_zero: Option<f64>,
    pub capped_at: Option<f64>,
    pub final_state: PathState,
    pub steps: u64,
    /// The step budget ran out before any stopping event or the horizon.
    pub budget_exhausted: bool,
}

/// Per-unit-intensity quantities of the stable measure split at `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableStepParams {
    /// Mass of `(eps, upper)`.
    pub lambda_eps: f64,
    /// First moment over `(eps, upper)`.
    pub m_eps: f64,
    /// Second moment over `(0, min(eps, upper)]`.
    pub sigma2_eps: f64,
    pub eps: f64,
    pub upper: Option<f64>,
}

fn check_alpha_eps(alpha: f64, eps: f64) -> Result<()> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::Domain {
            name: "alpha",
            value: alpha,
            domain: "(1, 2)",
        });
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Domain {
            name: "eps",
            value: eps,
            domain: "(0, inf)",
        });
    }
    Ok(())
}

pub fn stable_step_params(alpha: f64, eps: f64) -> Result<StableStepParams> {
    check_alpha_eps(alpha, eps)?;
    Ok(untruncated_params(stable_constant(alpha), alpha, eps))
}

/// As [`stable_step_params`] for the measure restricted to `(0, u_max]`.
pub fn truncated_step_params(alpha: f64, eps: f64, u_max: f64) -> Result<StableStepParams> {
    check_alpha_eps(alpha, eps)?;
    if !(u_max > 0.0) || !u_max.is_finite() {
        return Err(Error::Domain {
            name: "u_max",
            value: u_max,
            domain: "(0, inf)",
        });
    }
    Ok(truncated_params(stable_constant(alpha), alpha, eps, u_max))
}

#[inline]
fn untruncated_params(c: f64, alpha: f64, eps: f64) -> StableStepParams {
    let pe = eps.powf(-alpha);
    StableStepParams {
        lambda_eps: c * pe / alpha,
        m_eps: c * pe * eps / (alpha - 1.0),
        sigma2_eps: c * pe * eps * eps / (2.0 - alpha),
        eps,
        upper: None,
    }
}

fn truncated_params(c: f64, alpha: f64, eps: f64, u_max: f64) -> StableStepParams {
    if eps >= u_max {
        return StableStepParams {
            lambda_eps: 0.0,
            m_eps: 0.0,
            sigma2_eps: c * u_max.powf(2.0 - alpha) / (2.0 - alpha),
            eps: u_max,
            upper: Some(u_max),
        };
    }
    StableStepParams {
        lambda_eps: c * (eps.powf(-alpha) - u_max.powf(-alpha)) / alpha,
        m_eps: c * (eps.powf(1.0 - alpha) - u_max.powf(1.0 - alpha)) / (alpha - 1.0),
        sigma2_eps: c * eps.powf(2.0 - alpha) / (2.0 - alpha),
        eps,
        upper: Some(u_max),
    }
}

/// Draw from `mu` conditioned on `(eps, upper)` by inverting the tail.
#[inline]
fn pareto_jump(p: &StableStepParams, alpha: f64, rng: &mut RngStream) -> f64 {
    let u = rng.next_uniform();
    match p.upper {
        None => p.eps * (-u.ln() / alpha).exp(),
        Some(u_max) => {
            let lo = p.eps.powf(-alpha);
            let hi = u_max.powf(-alpha);
            (lo - u * (lo - hi)).powf(-1.0 / alpha).min(u_max)
        }
    }
}

/// Sum of a Poisson(`intensity`) number of stable jumps above the cutoff.
pub fn large_jump_sum(
    p: &StableStepParams,
    alpha: f64,
    intensity: f64,
    rng: &mut RngStream,
) -> f64 {
    let n = rng.poisson_unchecked(intensity);
    (0..n).map(|_| pareto_jump(p, alpha, rng)).sum()
}

/// The scheme bound to one model and configuration.
#[derive(Debug, Clone)]
pub struct Simulator<'m> {
    model: &'m ValidatedModel,
    cfg: SimConfig,
    alpha: f64,
    c_alpha: f64,
    // Cutoff parameters when they do not depend on the state.
    fixed: Option<StableStepParams>,
    nu_mass: f64,
}

impl<'m> Simulator<'m> {
    pub fn new(model: &'m ValidatedModel, cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let alpha = model.alpha();
        let c_alpha = model.c_alpha();
        let fixed = match cfg.cutoff {
            CutoffMode::Absolute => Some(params_for(model, c_alpha, alpha, cfg.eps_cut)),
            CutoffMode::Relative => None,
        };
        Ok(Self {
            model,
            alpha,
            c_alpha,
            fixed,
            nu_mass: if model.has_finite_jumps() {
                model.nu_mass()
            } else {
                0.0
            },
            cfg,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn model(&self) -> &ValidatedModel {
        self.model
    }

    fn params_at(&self, x: f64) -> StableStepParams {
        match self.fixed {
            Some(p) => p,
            None => params_for(self.model, self.c_alpha, self.alpha, self.cfg.eps_cut * x),
        }
    }

    /// Step size the scheme would use from state `x`.
    pub fn step_size(&self, x: f64) -> f64 {
        if !self.cfg.adaptive {
            return self.cfg.dt;
        }
        let a0 = self.model.a0(x);
        let a2 = self.model.a2(x);
        let mut dt = self.cfg.dt;
        if a0 > 0.0 {
            dt = dt.min(ADAPTIVE_FRACTION * x / a0);
        }
        let jump_rate = if a2 > 0.0 {
            a2 * self.params_at(x).lambda_eps
        } else {
            0.0
        } + self.model.a3(x) * self.nu_mass;
        if jump_rate > 0.0 {
            dt = dt.min(ADAPTIVE_FRACTION / jump_rate);
        }
        dt.max(self.cfg.min_dt)
    }

    /// State after one step of length `dt` from `x`, before boundary handling.
    #[inline]
    fn increment(&self, x: f64, dt: f64, rng: &mut RngStream) -> f64 {
        let model = self.model;
        let mut next = x + model.a0(x) * dt;
        let a1 = model.a1(x);
        if a1 > 0.0 {
            next += (a1 * dt).sqrt() * rng.next_normal();
        }
        let a2 = model.a2(x);
        if a2 > 0.0 {
            let p = self.params_at(x);
            next -= a2 * p.m_eps * dt;
            next += (a2 * p.sigma2_eps * dt).sqrt() * rng.next_normal();
            if p.lambda_eps > 0.0 {
                next += large_jump_sum(&p, self.alpha, a2 * p.lambda_eps * dt, rng);
            }
        }
        if self.nu_mass > 0.0 {
            let a3 = model.a3(x);
            if a3 > 0.0 {
                let m = rng.poisson_unchecked(a3 * self.nu_mass * dt);
                for _ in 0..m {
                    next += model.atom_for(rng.next_uniform());
                }
            }
        }
        next
    }

    /// One step of length `dt` (no adaptation), with absorption at zero
    /// and at the cap. Frozen states are returned unchanged.
    pub fn step_with(&self, state: PathState, dt: f64, rng: &mut RngStream) -> PathState {
        if state.is_frozen() {
            return state;
        }
        let next = self.increment(state.x, dt, rng);
        let t = state.t + dt;
        if !next.is_finite() || next >= self.cfg.cap_b {
            PathState {
                t,
                x: if next.is_finite() { next } else { self.cfg.cap_b },
                absorbed_zero: false,
                capped: true,
            }
        } else if next <= self.cfg.floor_zero {
            PathState {
                t,
                x: 0.0,
                absorbed_zero: true,
                capped: false,
            }
        } else {
            PathState {
                t,
                x: next,
                absorbed_zero: false,
                capped: false,
            }
        }
    }

    /// One step of the configured (possibly adaptive) size.
    pub fn step(&self, state: PathState, rng: &mut RngStream) -> PathState {
        let dt = self.step_size(state.x);
        self.step_with(state, dt, rng)
    }

    /// Run from `x0` until `tau_a^- ^ tau_b^+`, absorption, the cap, or
    /// `horizon` (clamped to the configured horizon). `observer` sees every
    /// state including the initial one.
    pub fn simulate_with<F>(
        &self,
        x0: f64,
        a: f64,
        b: f64,
        horizon: f64,
        rng: &mut RngStream,
        mut observer: F,
    ) -> Result<PassageRecord>
    where
        F: FnMut(&PathState, f64),
    {
        if !(a >= 0.0 && a < x0 && x0 < b && b <= self.cfg.cap_b) {
            return Err(Error::Precondition(format!(
                "need 0 <= a < x0 < b <= cap_b, got a = {a}, x0 = {x0}, b = {b}, cap_b = {}",
                self.cfg.cap_b
            )));
        }
        let horizon = horizon.min(self.cfg.horizon_t);
        let mut state = PathState::new(x0);
        let mut rec = PassageRecord {
            tau_a_minus: None,
            tau_b_plus: None,
            tau_zero: None,
            capped_at: None,
            final_state: state,
            steps: 0,
            budget_exhausted: false,
        };
        while state.t < horizon {
            if rec.steps >= self.cfg.max_steps {
                rec.budget_exhausted = true;
                break;
            }
            let dt = self.step_size(state.x).min(horizon - state.t);
            let prev = state;
            state = self.step_with(state, dt, rng);
            // Land exactly on the horizon despite rounding in the sum.
            if horizon - state.t < 1e-12 * horizon {
                state.t = horizon;
            }
            rec.steps += 1;
            observer(&prev, dt);
            let t = state.t;
            if state.x < a {
                rec.tau_a_minus = Some(t);
            }
            if state.x > b {
                rec.tau_b_plus = Some(t);
            }
            if state.absorbed_zero {
                rec.tau_zero = Some(t);
            }
            if state.capped {
                rec.capped_at = Some(t);
            }
            if state.is_frozen() || rec.tau_a_minus.is_some() || rec.tau_b_plus.is_some() {
                break;
            }
        }
        rec.final_state = state;
        Ok(rec)
    }

    /// [`Self::simulate_with`] with the configured horizon and no observer.
    pub fn simulate_until(
        &self,
        x0: f64,
        a: f64,
        b: f64,
        rng: &mut RngStream,
    ) -> Result<PassageRecord> {
        self.simulate_with(x0, a, b, self.cfg.horizon_t, rng, |_, _| {})
    }

    /// Full path from `x0` over the configured horizon (stopping only at
    /// absorption or the cap), as `(t, x)` pairs.
    pub fn trace(&self, x0: f64, rng: &mut RngStream) -> Result<(Vec<(f64, f64)>, PassageRecord)> {
        let mut points = Vec::new();
        let rec = self.simulate_with(x0, 0.0, self.cfg.cap_b, self.cfg.horizon_t, rng, |s, _| {
            points.push((s.t, s.x))
        })?;
        points.push((rec.final_state.t, rec.final_state.x));
        Ok((points, rec))
    }

    /// Sample mean and standard error of
    /// `g(X_{t ^ gamma}) - g(x0) - int_0^{t ^ gamma} Lg(X_s) ds`
    /// over `n_paths` paths, `gamma = tau_a^- ^ tau_b^+`. The integral is a
    /// left-point sum over the simulation grid; path `i` uses stream `i`.
    #[allow(clippy::too_many_arguments)]
    pub fn martingale_residual<G: TestFunction + ?Sized>(
        &self,
        g: &G,
        x0: f64,
        t: f64,
        a: f64,
        b: f64,
        n_paths: u64,
        seed: u64,
    ) -> Result<MartingaleResidual> {
        if !(a > 0.0) || n_paths < 2 {
            return Err(Error::Precondition(
                "martingale residual needs a > 0 and at least two paths".into(),
            ));
        }
        let g0 = g.value(x0);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..n_paths {
            let mut rng = RngStream::new(seed, i);
            let mut integral = 0.0;
            let mut failure = None;
            let rec = self.simulate_with(x0, a, b, t, &mut rng, |s, dt| {
                match apply_generator(self.model, g, s.x) {
                    Ok(v) => integral += v * dt,
                    Err(e) => {
                        failure.get_or_insert(e);
                    }
                }
            })?;
            if let Some(e) = failure {
                return Err(e);
            }
            let r = g.value(rec.final_state.x) - g0 - integral;
            sum += r;
            sum_sq += r * r;
        }
        let n = n_paths as f64;
        let mean = sum / n;
        let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        Ok(MartingaleResidual {
            residual: mean,
            stderr: (var / n).sqrt(),
            n_paths,
        })
    }
}

fn params_for(model: &ValidatedModel, c: f64, alpha: f64, eps: f64) -> StableStepParams {
    match model.spec().mu.support {
        Support::Unbounded => untruncated_params(c, alpha, eps),
        Support::UpTo { u_max } => truncated_params(c, alpha, eps, u_max),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleResidual {
    pub residual: f64,
    pub stderr: f64,
    pub n_paths: u64,
}
