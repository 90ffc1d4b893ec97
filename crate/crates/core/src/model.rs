//! Parameterization of the jump SDE driving the branching process:
//! drift `a0`, diffusion rate `a1`, stable jump rate `a2` against `mu` on the
//! set `U`, and finite jump rate `a3` against `nu` outside `U`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::gamma_positive;

/// Tolerance for deciding the critical manifold on floating inputs.
pub const CRITICAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("alpha out of range: {0} is not in (1, 2)")]
    AlphaOutOfRange(f64),
    #[error("negative rate coefficient: {rate}.b = {value}")]
    NegativeCoefficient { rate: &'static str, value: f64 },
    #[error("negative rate exponent: {rate}.r = {value}")]
    NegativeExponent { rate: &'static str, value: f64 },
    #[error("drift coefficient b0 must be strictly positive, got {0}")]
    ZeroDrift(f64),
    #[error("invalid table for {rate}: {reason}")]
    InvalidTable { rate: &'static str, reason: String },
    #[error("atom inside U: nu has an atom at z = {0}")]
    AtomInsideSupport(f64),
    #[error("invalid atom (z = {z}, weight = {weight}): both must be positive and finite")]
    InvalidAtom { z: f64, weight: f64 },
    #[error("invalid support cut u_max = {0}")]
    InvalidSupportCut(f64),
    #[error("unsupported for this model: {0}")]
    Unsupported(&'static str),
}

impl ModelError {
    /// Stable machine-readable code for each failure kind.
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::AlphaOutOfRange(_) => "alpha_out_of_range",
            ModelError::NegativeCoefficient { .. } => "negative_coefficient",
            ModelError::NegativeExponent { .. } => "negative_exponent",
            ModelError::ZeroDrift(_) => "zero_drift",
            ModelError::InvalidTable { .. } => "invalid_table",
            ModelError::AtomInsideSupport(_) => "atom_inside_u",
            ModelError::InvalidAtom { .. } => "invalid_atom",
            ModelError::InvalidSupportCut(_) => "invalid_support_cut",
            ModelError::Unsupported(_) => "unsupported",
        }
    }
}

/// A nonnegative rate function on `[0, inf)`.
///
/// Tabulated functions interpolate linearly between knots and hold the
/// first/last knot value outside the table, so they stay bounded on every
/// bounded interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateFunction {
    PowerLaw { b: f64, r: f64 },
    Tabulated { knots: Vec<(f64, f64)> },
}

impl Default for RateFunction {
    fn default() -> Self {
        RateFunction::zero()
    }
}

impl RateFunction {
    pub fn zero() -> Self {
        RateFunction::PowerLaw { b: 0.0, r: 0.0 }
    }

    pub fn power(b: f64, r: f64) -> Self {
        RateFunction::PowerLaw { b, r }
    }

    pub fn tabulated(knots: Vec<(f64, f64)>) -> Self {
        RateFunction::Tabulated { knots }
    }

    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        match self {
            RateFunction::PowerLaw { b, r } => {
                if *b == 0.0 {
                    0.0
                } else if *r == 0.0 {
                    *b
                } else if *r == 1.0 {
                    b * u
                } else if *r == 2.0 {
                    b * u * u
                } else {
                    b * u.powf(*r)
                }
            }
            RateFunction::Tabulated { knots } => interpolate(knots, u),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            RateFunction::PowerLaw { b, .. } => *b == 0.0,
            RateFunction::Tabulated { knots } => knots.iter().all(|&(_, v)| v == 0.0),
        }
    }

    pub fn as_power_law(&self) -> Option<(f64, f64)> {
        match self {
            RateFunction::PowerLaw { b, r } => Some((*b, *r)),
            RateFunction::Tabulated { .. } => None,
        }
    }

    /// Multiply every value by `lambda` (a change of time scale).
    pub fn scaled(&self, lambda: f64) -> Self {
        match self {
            RateFunction::PowerLaw { b, r } => RateFunction::PowerLaw { b: b * lambda, r: *r },
            RateFunction::Tabulated { knots } => RateFunction::Tabulated {
                knots: knots.iter().map(|&(u, v)| (u, v * lambda)).collect(),
            },
        }
    }

    fn validate(&self, rate: &'static str) -> Result<(), ModelError> {
        match self {
            RateFunction::PowerLaw { b, r } => {
                if !(*b >= 0.0) || !b.is_finite() {
                    return Err(ModelError::NegativeCoefficient { rate, value: *b });
                }
                if !(*r >= 0.0) || !r.is_finite() {
                    return Err(ModelError::NegativeExponent { rate, value: *r });
                }
            }
            RateFunction::Tabulated { knots } => {
                let bad = |reason: &str| ModelError::InvalidTable {
                    rate,
                    reason: reason.to_string(),
                };
                if knots.is_empty() {
                    return Err(bad("no knots"));
                }
                if knots.iter().any(|&(u, v)| !u.is_finite() || !v.is_finite()) {
                    return Err(bad("non-finite knot"));
                }
                if knots.iter().any(|&(u, _)| u < 0.0) {
                    return Err(bad("knot location below zero"));
                }
                if let Some(&(_, v)) = knots.iter().find(|&&(_, v)| v < 0.0) {
                    return Err(ModelError::NegativeCoefficient { rate, value: v });
                }
                if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(bad("knot locations must be strictly increasing"));
                }
            }
        }
        Ok(())
    }
}

fn interpolate(knots: &[(f64, f64)], u: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if u <= first.0 {
        return first.1;
    }
    if u >= last.0 {
        return last.1;
    }
    let i = knots.partition_point(|&(k, _)| k <= u);
    let (u0, v0) = knots[i - 1];
    let (u1, v1) = knots[i];
    v0 + (v1 - v0) * (u - u0) / (u1 - u0)
}

/// The set `U` carrying the stable jumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Support {
    /// `U = (0, inf)`.
    Unbounded,
    /// `U = (0, u_max]`.
    UpTo { u_max: f64 },
}

impl Support {
    pub fn contains(&self, z: f64) -> bool {
        match self {
            Support::Unbounded => z > 0.0,
            Support::UpTo { u_max } => z > 0.0 && z <= *u_max,
        }
    }

    pub fn upper(&self) -> Option<f64> {
        match self {
            Support::Unbounded => None,
            Support::UpTo { u_max } => Some(*u_max),
        }
    }
}

/// Spectrally positive stable measure `c_alpha z^(-1-alpha) dz` restricted to `U`,
/// with `c_alpha = alpha (alpha - 1) / Gamma(2 - alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableMeasure {
    pub alpha: f64,
    pub support: Support,
}

impl StableMeasure {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            support: Support::Unbounded,
        }
    }

    pub fn truncated(alpha: f64, u_max: f64) -> Self {
        Self {
            alpha,
            support: Support::UpTo { u_max },
        }
    }

    pub fn c_alpha(&self) -> f64 {
        stable_constant(self.alpha)
    }

    pub fn density(&self, z: f64) -> f64 {
        if self.support.contains(z) {
            self.c_alpha() * z.powf(-1.0 - self.alpha)
        } else {
            0.0
        }
    }
}

pub fn stable_constant(alpha: f64) -> f64 {
    alpha * (alpha - 1.0) / gamma_positive(2.0 - alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub z: f64,
    pub weight: f64,
}

/// Finite jump measure `nu`, a finite list of weighted atoms outside `U`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FiniteMeasure {
    pub atoms: Vec<Atom>,
}

impl FiniteMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(atoms: Vec<Atom>) -> Self {
        Self { atoms }
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub a0: RateFunction,
    pub a1: RateFunction,
    pub a2: RateFunction,
    pub a3: RateFunction,
    pub mu: StableMeasure,
    pub nu: FiniteMeasure,
}

impl ModelSpec {
    /// Pure power-law model with `U = (0, inf)` and no finite jumps.
    pub fn power_law(alpha: f64, rates: [(f64, f64); 3]) -> Self {
        let [(b0, r0), (b1, r1), (b2, r2)] = rates;
        Self {
            a0: RateFunction::power(b0, r0),
            a1: RateFunction::power(b1, r1),
            a2: RateFunction::power(b2, r2),
            a3: RateFunction::zero(),
            mu: StableMeasure::new(alpha),
            nu: FiniteMeasure::empty(),
        }
    }

    pub fn validate(self) -> Result<ValidatedModel, ModelError> {
        validate(self)
    }

    /// Multiply all four rate functions by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            a0: self.a0.scaled(lambda),
            a1: self.a1.scaled(lambda),
            a2: self.a2.scaled(lambda),
            a3: self.a3.scaled(lambda),
            mu: self.mu,
            nu: self.nu.clone(),
        }
    }

    pub fn is_pure_power_law(&self) -> bool {
        self.a0.as_power_law().is_some()
            && self.a1.as_power_law().is_some()
            && self.a2.as_power_law().is_some()
            && self.mu.support == Support::Unbounded
            && self.nu.is_empty()
    }
}

/// A [`ModelSpec`] that passed [`validate`]; immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedModel {
    spec: ModelSpec,
    c_alpha: f64,
    gamma_alpha: f64,
    nu_mass: f64,
    // Running sums of atom weights, for sampling atoms by weight.
    nu_cumulative: Vec<f64>,
}

impl ValidatedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn into_spec(self) -> ModelSpec {
        self.spec
    }

    pub fn alpha(&self) -> f64 {
        self.spec.mu.alpha
    }

    pub fn c_alpha(&self) -> f64 {
        self.c_alpha
    }

    /// `Gamma(alpha)`.
    pub fn gamma_alpha(&self) -> f64 {
        self.gamma_alpha
    }

    pub fn nu_mass(&self) -> f64 {
        self.nu_mass
    }

    #[inline]
    pub fn a0(&self, u: f64) -> f64 {
        self.spec.a0.value(u)
    }
    #[inline]
    pub fn a1(&self, u: f64) -> f64 {
        self.spec.a1.value(u)
    }
    #[inline]
    pub fn a2(&self, u: f64) -> f64 {
        self.spec.a2.value(u)
    }
    #[inline]
    pub fn a3(&self, u: f64) -> f64 {
        self.spec.a3.value(u)
    }

    pub fn has_finite_jumps(&self) -> bool {
        self.nu_mass > 0.0 && !self.spec.a3.is_zero()
    }

    /// Atom picked by a uniform draw `w` in (0, 1), proportionally to weight.
    pub(crate) fn atom_for(&self, w: f64) -> f64 {
        let target = w * self.nu_mass;
        let i = self.nu_cumulative.partition_point(|&c| c < target);
        self.spec.nu.atoms[i.min(self.spec.nu.atoms.len() - 1)].z
    }
}

/// Check every model invariant and tag the spec as valid.
pub fn validate(spec: ModelSpec) -> Result<ValidatedModel, ModelError> {
    let alpha = spec.mu.alpha;
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(ModelError::AlphaOutOfRange(alpha));
    }
    if let Support::UpTo { u_max } = spec.mu.support {
        if !(u_max > 0.0) || !u_max.is_finite() {
            return Err(ModelError::InvalidSupportCut(u_max));
        }
    }
    spec.a0.validate("a0")?;
    spec.a1.validate("a1")?;
    spec.a2.validate("a2")?;
    spec.a3.validate("a3")?;
    if let RateFunction::PowerLaw { b, .. } = spec.a0 {
        if b <= 0.0 {
            return Err(ModelError::ZeroDrift(b));
        }
    }
    for atom in &spec.nu.atoms {
        if !(atom.z > 0.0 && atom.weight > 0.0) || !atom.z.is_finite() || !atom.weight.is_finite()
        {
            return Err(ModelError::InvalidAtom {
                z: atom.z,
                weight: atom.weight,
            });
        }
        if spec.mu.support.contains(atom.z) {
            return Err(ModelError::AtomInsideSupport(atom.z));
        }
    }
    let nu_cumulative = spec
        .nu
        .atoms
        .iter()
        .scan(0.0, |acc, a| {
            *acc += a.weight;
            Some(*acc)
        })
        .collect();
    Ok(ValidatedModel {
        c_alpha: stable_constant(alpha),
        gamma_alpha: gamma_positive(alpha),
        nu_mass: spec.nu.total_mass(),
        nu_cumulative,
        spec,
    })
}

/// Distance of a power-law model from the critical manifold
/// `b0 = b1/2 + Gamma(alpha) b2`, `r1 = r0 + 1` (if `b1 > 0`),
/// `r2 = r0 + alpha - 1` (if `b2 > 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalityCheck {
    pub coefficient_deficit: f64,
    pub r1_residual: Option<f64>,
    pub r2_residual: Option<f64>,
    pub is_critical: bool,
}

pub fn critical_deficit(model: &ValidatedModel) -> Result<CriticalityCheck, ModelError> {
    let spec = model.spec();
    if spec.mu.support != Support::Unbounded {
        return Err(ModelError::Unsupported("criticality needs U = (0, inf)"));
    }
    if !spec.nu.is_empty() {
        return Err(ModelError::Unsupported("criticality needs an empty nu"));
    }
    let (Some((b0, r0)), Some((b1, r1)), Some((b2, r2))) = (
        spec.a0.as_power_law(),
        spec.a1.as_power_law(),
        spec.a2.as_power_law(),
    ) else {
        return Err(ModelError::Unsupported("criticality needs power-law rates"));
    };
    let gamma_alpha = model.gamma_alpha();
    let jump_part = gamma_alpha * b2;
    let coefficient_deficit = b0 - 0.5 * b1 - jump_part;
    let scale = b0 + 0.5 * b1 + jump_part;
    let r1_residual = (b1 > 0.0).then_some(r1 - (r0 + 1.0));
    let r2_residual = (b2 > 0.0).then_some(r2 - (r0 + model.alpha() - 1.0));
    let is_critical = coefficient_deficit.abs() <= CRITICAL_TOL * scale
        && r1_residual.map_or(true, |r| r.abs() <= CRITICAL_TOL)
        && r2_residual.map_or(true, |r| r.abs() <= CRITICAL_TOL);
    Ok(CriticalityCheck {
        coefficient_deficit,
        r1_residual,
        r2_residual,
        is_critical,
    })
}
