//! Boundary classification: extinction, explosion, and the behaviour at
//! infinity, decided symbolically for pure power laws and from grid
//! evidence otherwise.

use serde::{Deserialize, Serialize};

use super::functions::{h_rho_with, phi_terms};
use crate::error::{Error, Result};
use crate::model::{critical_deficit, CriticalityCheck, ValidatedModel, CRITICAL_TOL};
use crate::numerics::Integrator;

/// Extra values of `rho` tried after the configured one.
pub const RHO_SCAN: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// Relative size below which a value of `phi` counts as zero.
const ZERO_PHI_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriteriaConfig {
    pub rho: f64,
    /// Decreasing towards zero.
    pub small_u_grid: Vec<f64>,
    /// Increasing, every entry above 3.
    pub large_u_grid: Vec<f64>,
    pub quad_tol: f64,
}

impl Default for CriteriaConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            small_u_grid: (0..=6).map(|k| 10f64.powi(-k)).collect(),
            large_u_grid: (1..=8).map(|k| 10f64.powi(k)).collect(),
            quad_tol: 1e-10,
        }
    }
}

impl CriteriaConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Precondition(msg.to_string()));
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return fail("criteria.rho must be positive");
        }
        if !(self.quad_tol > 0.0) || !self.quad_tol.is_finite() {
            return fail("criteria.quad_tol must be positive");
        }
        if self.small_u_grid.is_empty() || self.large_u_grid.is_empty() {
            return fail("criteria grids must be nonempty");
        }
        if self.small_u_grid.iter().any(|&u| !(u > 0.0) || !u.is_finite())
            || self.small_u_grid.windows(2).any(|w| w[1] >= w[0])
        {
            return fail("criteria.small_u_grid must be positive and strictly decreasing");
        }
        if self.large_u_grid.iter().any(|&u| !(u > 3.0) || !u.is_finite())
            || self.large_u_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return fail("criteria.large_u_grid must exceed 3 and strictly increase");
        }
        Ok(())
    }
}

/// Whether a sufficient condition of the criteria is met.
///
/// `NotEstablished` means the condition fails; the criteria are only
/// sufficient, so it is not a proof of the opposite behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    NotEstablished,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfinityBehavior {
    StaysInfinite,
    ComesDownFromInfinity,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Symbolic,
    Numeric,
}

/// Eventual sign of `phi` near a boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Negative,
    Zero,
    Positive,
    Mixed,
}

impl Sign {
    fn nonpositive(self) -> bool {
        matches!(self, Sign::Negative | Sign::Zero)
    }
    fn nonnegative(self) -> bool {
        matches!(self, Sign::Positive | Sign::Zero)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallSample {
    pub u: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LargeSample {
    pub u: f64,
    pub phi: f64,
    pub h_rho: f64,
    /// `(ln u)^(-rho-2) H_rho(u)`.
    pub scaled_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub rho: f64,
    pub phi_sign_near_zero: Sign,
    pub phi_sign_near_infinity: Sign,
    pub small_u: Vec<SmallSample>,
    pub large_u: Vec<LargeSample>,
    pub criticality: Option<CriticalityCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub no_extinction: Verdict,
    pub no_explosion: Verdict,
    pub infinity_behavior: InfinityBehavior,
    pub method: Method,
    pub evidence: Evidence,
}

pub fn classify(model: &ValidatedModel, cfg: &CriteriaConfig) -> Result<BoundaryReport> {
    cfg.validate()?;
    let integrator = Integrator::new(cfg.quad_tol);
    let small_u = cfg
        .small_u_grid
        .iter()
        .map(|&u| {
            Ok(SmallSample {
                u,
                phi: phi_terms(model, u, &integrator)?.total(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if model.spec().is_pure_power_law() {
        classify_symbolic(model, cfg, &integrator, small_u)
    } else {
        classify_numeric(model, cfg, &integrator, small_u)
    }
}

fn large_samples(
    model: &ValidatedModel,
    grid: &[f64],
    rho: f64,
    integrator: &Integrator,
) -> Result<Vec<LargeSample>> {
    grid.iter()
        .map(|&u| {
            let phi = phi_terms(model, u, integrator)?.total();
            let h = h_rho_with(model, u, rho, integrator)?;
            Ok(LargeSample {
                u,
                phi,
                h_rho: h,
                scaled_h: u.ln().powf(-rho - 2.0) * h,
            })
        })
        .collect()
}

fn extinction_verdict(sign: Sign) -> Verdict {
    match sign {
        Sign::Mixed => Verdict::Inconclusive,
        s if s.nonpositive() => Verdict::Holds,
        _ => Verdict::NotEstablished,
    }
}

fn explosion_verdict(sign: Sign) -> Verdict {
    match sign {
        Sign::Mixed => Verdict::Inconclusive,
        s if s.nonnegative() => Verdict::Holds,
        _ => Verdict::NotEstablished,
    }
}

fn classify_symbolic(
    model: &ValidatedModel,
    cfg: &CriteriaConfig,
    integrator: &Integrator,
    small_u: Vec<SmallSample>,
) -> Result<BoundaryReport> {
    let spec = model.spec();
    let alpha = model.alpha();
    // The pure power-law check guarantees these.
    let (b0, r0) = spec.a0.as_power_law().unwrap_or_default();
    let (b1, r1) = spec.a1.as_power_law().unwrap_or_default();
    let (b2, r2) = spec.a2.as_power_law().unwrap_or_default();

    // phi(u) = -b0 u^(r0-1) + b1/2 u^(r1-2) + Gamma(alpha) b2 u^(r2-alpha)
    let terms = [
        (-b0, r0 - 1.0),
        (0.5 * b1, r1 - 2.0),
        (model.gamma_alpha() * b2, r2 - alpha),
    ];
    let (near_zero, near_infinity) = power_sum_signs(&terms);

    // H_rho ~ b1/2 u^(r1-2) + Theta(b2 u^(r2-alpha) (ln u)^-2).
    let h_unbounded_diffusion = b1 > 0.0 && r1 > 2.0 + CRITICAL_TOL;
    let h_unbounded_jump = b2 > 0.0 && r2 > alpha + CRITICAL_TOL;
    // Polynomial growth beats any power of ln u, so unbounded H already
    // forces (ln u)^(-rho-2) H -> inf; the tests are complementary here.
    let h_bounded = !h_unbounded_diffusion && !h_unbounded_jump;

    let infinity_behavior = if near_infinity.nonpositive() && h_bounded {
        InfinityBehavior::StaysInfinite
    } else if near_infinity.nonnegative() && !h_bounded {
        InfinityBehavior::ComesDownFromInfinity
    } else {
        InfinityBehavior::Inconclusive
    };
    let criticality = critical_deficit(model).ok();
    let rho = cfg.rho;
    Ok(BoundaryReport {
        no_extinction: extinction_verdict(near_zero),
        no_explosion: explosion_verdict(near_infinity),
        infinity_behavior,
        method: Method::Symbolic,
        evidence: Evidence {
            rho,
            phi_sign_near_zero: near_zero,
            phi_sign_near_infinity: near_infinity,
            small_u,
            large_u: large_samples(model, &cfg.large_u_grid, rho, integrator)?,
            criticality,
        },
    })
}

/// Eventual signs (at zero, at infinity) of `sum c_k u^(e_k)`, after merging
/// terms whose exponents agree within tolerance.
pub fn power_sum_signs(terms: &[(f64, f64)]) -> (Sign, Sign) {
    let mut groups: Vec<(f64, f64, f64)> = Vec::new(); // (exponent, sum, scale)
    for &(c, e) in terms {
        if c == 0.0 {
            continue;
        }
        match groups.iter_mut().find(|g| (g.0 - e).abs() <= CRITICAL_TOL) {
            Some(g) => {
                g.1 += c;
                g.2 += c.abs();
            }
            None => groups.push((e, c, c.abs())),
        }
    }
    groups.retain(|g| g.1.abs() > CRITICAL_TOL * g.2);
    let sign_of = |g: Option<&(f64, f64, f64)>| match g {
        None => Sign::Zero,
        Some(g) if g.1 > 0.0 => Sign::Positive,
        Some(_) => Sign::Negative,
    };
    let by_exponent = |a: &&(f64, f64, f64), b: &&(f64, f64, f64)| a.0.total_cmp(&b.0);
    (
        sign_of(groups.iter().min_by(by_exponent)),
        sign_of(groups.iter().max_by(by_exponent)),
    )
}

/// Uniform sign over the grid plus a monotone trend in the last three
/// points (grid order), else `Mixed`.
fn grid_sign(values: &[(f64, f64)]) -> Sign {
    // (phi, magnitude of its terms)
    let classify_one = |&(v, scale): &(f64, f64)| {
        if v.abs() <= ZERO_PHI_TOL * scale {
            Sign::Zero
        } else if v > 0.0 {
            Sign::Positive
        } else {
            Sign::Negative
        }
    };
    let signs: Vec<Sign> = values.iter().map(classify_one).collect();
    let Some(&first) = signs.first() else {
        return Sign::Mixed;
    };
    if signs.iter().any(|&s| s != first) {
        return Sign::Mixed;
    }
    if first == Sign::Zero {
        return Sign::Zero;
    }
    let tail: Vec<f64> = values.iter().rev().take(3).rev().map(|v| v.0).collect();
    let up = tail.windows(2).all(|w| w[1] >= w[0]);
    let down = tail.windows(2).all(|w| w[1] <= w[0]);
    if up || down {
        first
    } else {
        Sign::Mixed
    }
}

/// Tail of `H_rho` looks bounded: non-increasing, or increments shrinking
/// at least geometrically.
fn looks_bounded(h: &[f64]) -> bool {
    let n = h.len();
    if n < 3 {
        return false;
    }
    let (x1, x2, x3) = (h[n - 3], h[n - 2], h[n - 1]);
    let slack = 1e-12 * x1.abs().max(x3.abs());
    let d2 = x2 - x1;
    let d3 = x3 - x2;
    (d2 <= slack && d3 <= slack) || (d2 > 0.0 && d3 <= 0.5 * d2)
}

/// `(ln u)^(-rho-2) H_rho` strictly increasing and not decelerating.
fn looks_divergent(g: &[f64]) -> bool {
    let n = g.len();
    if n < 3 {
        return false;
    }
    let (x1, x2, x3) = (g[n - 3], g[n - 2], g[n - 1]);
    x2 > x1 && x3 > x2 && x3 - x2 >= x2 - x1
}

fn classify_numeric(
    model: &ValidatedModel,
    cfg: &CriteriaConfig,
    integrator: &Integrator,
    small_u: Vec<SmallSample>,
) -> Result<BoundaryReport> {
    let small_with_scale = cfg
        .small_u_grid
        .iter()
        .zip(&small_u)
        .map(|(&u, s)| Ok((s.phi, phi_terms(model, u, integrator)?.magnitude())))
        .collect::<Result<Vec<_>>>()?;
    let large_with_scale = cfg
        .large_u_grid
        .iter()
        .map(|&u| {
            let t = phi_terms(model, u, integrator)?;
            Ok((t.total(), t.magnitude()))
        })
        .collect::<Result<Vec<_>>>()?;
    let near_zero = grid_sign(&small_with_scale);
    let near_infinity = grid_sign(&large_with_scale);

    let mut rhos = vec![cfg.rho];
    rhos.extend(RHO_SCAN.iter().copied().filter(|&r| r != cfg.rho));
    let mut chosen = None;
    for &rho in &rhos {
        let samples = large_samples(model, &cfg.large_u_grid, rho, integrator)?;
        let h: Vec<f64> = samples.iter().map(|s| s.h_rho).collect();
        let g: Vec<f64> = samples.iter().map(|s| s.scaled_h).collect();
        let behavior = if near_infinity.nonpositive() && looks_bounded(&h) {
            Some(InfinityBehavior::StaysInfinite)
        } else if near_infinity.nonnegative() && looks_divergent(&g) {
            Some(InfinityBehavior::ComesDownFromInfinity)
        } else {
            None
        };
        if let Some(b) = behavior {
            chosen = Some((rho, samples, b));
            break;
        }
        if chosen.is_none() && rho == cfg.rho {
            chosen = Some((rho, samples, InfinityBehavior::Inconclusive));
        }
    }
    let (rho, large_u, infinity_behavior) =
        chosen.expect("rho scan always evaluates the configured rho");
    Ok(BoundaryReport {
        no_extinction: extinction_verdict(near_zero),
        no_explosion: explosion_verdict(near_infinity),
        infinity_behavior,
        method: Method::Numeric,
        evidence: Evidence {
            rho,
            phi_sign_near_zero: near_zero,
            phi_sign_near_infinity: near_infinity,
            small_u,
            large_u,
            criticality: None,
        },
    })
}
