//! The scalar functions behind the boundary criteria: `phi`, `K_rho`,
//! `H_rho`, and the stable-measure integrals they need.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{stable_constant, StableMeasure, Support, ValidatedModel};
use crate::numerics::Integrator;

/// Below this value of `y - 1` the `K_rho` shape is evaluated through its
/// Taylor remainder instead of the direct difference.
pub const K_SERIES_THRESHOLD: f64 = 1e-4;

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            domain: "(0, inf)",
        })
    }
}

/// `z^2 * int_0^1 (u + v z)^-2 (1 - v) dv = z/u - ln(1 + z/u)`.
pub fn second_order_remainder(u: f64, z: f64) -> f64 {
    let x = z / u;
    if x < 1e-3 {
        // x^2/2 - x^3/3 + ... ; truncation error below x^7/7.
        let x2 = x * x;
        x2 * (0.5 - x * (1.0 / 3.0 - x * (0.25 - x * (0.2 - x / 6.0))))
    } else {
        x - x.ln_1p()
    }
}

/// `second_order_remainder(u, z) / z^2`, finite down to `z = 0`.
fn remainder_over_square(u: f64, z: f64) -> f64 {
    let x = z / u;
    let shape = if x < 1e-3 {
        0.5 - x * (1.0 / 3.0 - x * (0.25 - x * (0.2 - x / 6.0)))
    } else {
        (x - x.ln_1p()) / (x * x)
    };
    shape / (u * u)
}

/// `z * int_0^1 (u + v z)^-1 dv = ln(1 + z/u)`.
pub fn first_order_increment(u: f64, z: f64) -> f64 {
    (z / u).ln_1p()
}

/// `int_U (z/u - ln(1 + z/u)) mu(dz)`, the stable part of `phi` per unit `a2`.
///
/// Closed form `Gamma(alpha) u^-alpha` when `U = (0, inf)`; quadrature on a
/// truncated support.
pub fn stable_second_order(mu: &StableMeasure, u: f64, integrator: &Integrator) -> Result<f64> {
    match mu.support {
        Support::Unbounded => Ok(crate::numerics::gamma_positive(mu.alpha) * u.powf(-mu.alpha)),
        Support::UpTo { .. } => stable_second_order_quadrature(mu, u, integrator),
    }
}

/// Same integral as [`stable_second_order`], always by quadrature.
pub fn stable_second_order_quadrature(
    mu: &StableMeasure,
    u: f64,
    integrator: &Integrator,
) -> Result<f64> {
    check_positive("u", u)?;
    let alpha = mu.alpha;
    let c = stable_constant(alpha);
    // c z^(1-alpha) * [remainder / z^2] near zero, c z^-alpha * [remainder / z] beyond u.
    let head = |z: f64| c * remainder_over_square(u, z);
    let r = match mu.support {
        Support::Unbounded => {
            let tail = |z: f64| {
                if z.is_finite() {
                    c * second_order_remainder(u, z) / z
                } else {
                    c / u
                }
            };
            integrator.semi_infinite_weighted(head, 1.0 - alpha, tail, -alpha, u)?
        }
        Support::UpTo { u_max } => integrator.head_weighted(head, u_max, 1.0 - alpha)?,
    };
    Ok(r.value)
}

/// The four additive pieces of `phi(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiTerms {
    pub drift: f64,
    pub diffusion: f64,
    pub stable: f64,
    pub finite: f64,
}

impl PhiTerms {
    pub fn total(&self) -> f64 {
        self.drift + self.diffusion + self.stable + self.finite
    }

    /// Sum of absolute values; the scale against which a zero total is judged.
    pub fn magnitude(&self) -> f64 {
        self.drift.abs() + self.diffusion.abs() + self.stable.abs() + self.finite.abs()
    }
}

fn finite_term(model: &ValidatedModel, u: f64) -> f64 {
    if !model.has_finite_jumps() {
        return 0.0;
    }
    let a3 = model.a3(u);
    if a3 == 0.0 {
        return 0.0;
    }
    let sum: f64 = model
        .spec()
        .nu
        .atoms
        .iter()
        .map(|atom| atom.weight * first_order_increment(u, atom.z))
        .sum();
    -a3 * sum
}

pub fn phi_terms(model: &ValidatedModel, u: f64, integrator: &Integrator) -> Result<PhiTerms> {
    check_positive("u", u)?;
    let a2 = model.a2(u);
    let stable = if a2 == 0.0 {
        0.0
    } else {
        a2 * stable_second_order(&model.spec().mu, u, integrator)?
    };
    Ok(PhiTerms {
        drift: -model.a0(u) / u,
        diffusion: 0.5 * model.a1(u) / (u * u),
        stable,
        finite: finite_term(model, u),
    })
}

/// `phi(u)` with the default quadrature tolerance.
pub fn phi(model: &ValidatedModel, u: f64) -> Result<f64> {
    phi_with(model, u, &Integrator::default())
}

pub fn phi_with(model: &ValidatedModel, u: f64, integrator: &Integrator) -> Result<f64> {
    Ok(phi_terms(model, u, integrator)?.total())
}

/// `phi(u)` with the stable integral always done by quadrature.
pub fn phi_by_quadrature(model: &ValidatedModel, u: f64, integrator: &Integrator) -> Result<f64> {
    check_positive("u", u)?;
    let a2 = model.a2(u);
    let stable = if a2 == 0.0 {
        0.0
    } else {
        a2 * stable_second_order_quadrature(&model.spec().mu, u, integrator)?
    };
    Ok(-model.a0(u) / u + 0.5 * model.a1(u) / (u * u) + stable + finite_term(model, u))
}

/// `f(y) = y^-rho + rho y - (rho + 1)`, written in terms of `d = y - 1`.
fn k_from_excess(d: f64, rho: f64) -> f64 {
    if d.abs() < K_SERIES_THRESHOLD {
        // rho (rho+1) d^2 int_0^1 (1 + v d)^(-rho-2) (1 - v) dv, expanded in d.
        let p2 = rho + 2.0;
        let p3 = rho + 3.0;
        let p4 = rho + 4.0;
        let remainder = 0.5 - d * (p2 / 6.0 - d * (p2 * p3 / 24.0 - d * p2 * p3 * p4 / 120.0));
        rho * (rho + 1.0) * d * d * remainder
    } else {
        (-rho * d.ln_1p()).exp_m1() + rho * d
    }
}

/// `f(1 + d) / d^2`, finite at `d = 0`.
fn k_over_square(d: f64, rho: f64) -> f64 {
    if d.abs() < K_SERIES_THRESHOLD {
        let p2 = rho + 2.0;
        let p3 = rho + 3.0;
        let p4 = rho + 4.0;
        rho * (rho + 1.0) * (0.5 - d * (p2 / 6.0 - d * (p2 * p3 / 24.0 - d * p2 * p3 * p4 / 120.0)))
    } else {
        k_from_excess(d, rho) / (d * d)
    }
}

/// `f(y) = y^-rho + rho y - (rho + 1)` for `y > 0`.
pub fn k_shape(y: f64, rho: f64) -> Result<f64> {
    check_positive("y", y)?;
    check_positive("rho", rho)?;
    Ok(k_from_excess(y - 1.0, rho))
}

/// `K_rho(u, z)` with `y = ln(u + z) / ln(u)`, for `u > 3`, `z >= 0`.
pub fn k_rho(u: f64, z: f64, rho: f64) -> Result<f64> {
    check_k_args(u, z, rho)?;
    Ok(k_rho_unchecked(u, z, rho))
}

fn check_k_args(u: f64, z: f64, rho: f64) -> Result<()> {
    if !(u > 3.0) || !u.is_finite() {
        return Err(Error::Domain {
            name: "u",
            value: u,
            domain: "(3, inf)",
        });
    }
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::Domain {
            name: "z",
            value: z,
            domain: "[0, inf)",
        });
    }
    check_positive("rho", rho)
}

#[inline]
fn k_rho_unchecked(u: f64, z: f64, rho: f64) -> f64 {
    let d = (z / u).ln_1p() / u.ln();
    k_from_excess(d, rho)
}

/// `K_rho(u, z)` through the Taylor remainder
/// `rho (rho+1) (y-1)^2 int_0^1 (1 + v (y-1))^(-rho-2) (1 - v) dv`,
/// with the inner integral done by quadrature.
pub fn k_rho_by_remainder(u: f64, z: f64, rho: f64, integrator: &Integrator) -> Result<f64> {
    check_k_args(u, z, rho)?;
    let d = (z / u).ln_1p() / u.ln();
    if d == 0.0 {
        return Ok(0.0);
    }
    let inner = integrator.unit(|v| (1.0 + v * d).powf(-rho - 2.0) * (1.0 - v))?;
    Ok(rho * (rho + 1.0) * d * d * inner.value)
}

/// `int_U K_rho(u, z) mu(dz)`.
pub fn stable_k_integral(
    mu: &StableMeasure,
    u: f64,
    rho: f64,
    integrator: &Integrator,
) -> Result<f64> {
    check_k_args(u, 0.0, rho)?;
    let alpha = mu.alpha;
    let c = stable_constant(alpha);
    let ln_u = u.ln();
    // K / z^2 = (d / z)^2 * K / d^2 with d = ln(1 + z/u) / ln u.
    let head = |z: f64| {
        let x = z / u;
        let d_over_z = if x < 1e-8 { 1.0 - 0.5 * x } else { x.ln_1p() / x } / (u * ln_u);
        let d = z * d_over_z;
        c * d_over_z * d_over_z * k_over_square(d, rho)
    };
    let r = match mu.support {
        Support::Unbounded => {
            let tail = |z: f64| {
                if z.is_finite() {
                    c * k_rho_unchecked(u, z, rho)
                } else {
                    0.0
                }
            };
            integrator.semi_infinite_weighted(head, 1.0 - alpha, tail, -1.0 - alpha, u)?
        }
        Support::UpTo { u_max } => integrator.head_weighted(head, u_max, 1.0 - alpha)?,
    };
    Ok(r.value)
}

/// Closed-form lower and upper bounds on `int_0^inf K_rho(u, z) mu(dz)` for
/// the unbounded stable measure, `u > 3`.
///
/// The upper bound uses `ln(1 + z) <= C (z ^ sqrt(z))` with `C = 1`, which
/// is the supremum of the ratio (approached as `z -> 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KBounds {
    pub lower: f64,
    pub upper: f64,
}

pub fn k_integral_bounds(alpha: f64, u: f64, rho: f64) -> Result<KBounds> {
    check_k_args(u, 0.0, rho)?;
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::Domain {
            name: "alpha",
            value: alpha,
            domain: "(1, 2)",
        });
    }
    let c = stable_constant(alpha);
    let ln_u = u.ln();
    let common = rho * (rho + 1.0) * u.powf(-alpha) * ln_u.powi(-2);
    // int (z ^ z^2) mu(dz) over (0, inf)
    let truncated_moment = c * (1.0 / (2.0 - alpha) + 1.0 / (alpha - 1.0));
    // mu([1, 2])
    let mass_1_2 = c / alpha * (1.0 - 2f64.powf(-alpha));
    let upper = common * truncated_moment;
    let lower = common
        * (1.0 + 3f64.ln() / ln_u).powf(-rho - 2.0)
        * 1.5f64.ln().powi(2)
        * mass_1_2
        * 0.125;
    Ok(KBounds { lower, upper })
}

/// `H_rho(u)` with the default quadrature tolerance.
pub fn h_rho(model: &ValidatedModel, u: f64, rho: f64) -> Result<f64> {
    h_rho_with(model, u, rho, &Integrator::default())
}

pub fn h_rho_with(
    model: &ValidatedModel,
    u: f64,
    rho: f64,
    integrator: &Integrator,
) -> Result<f64> {
    check_k_args(u, 0.0, rho)?;
    let diffusion = 0.5 * model.a1(u) / (u * u);
    let a2 = model.a2(u);
    let stable = if a2 == 0.0 {
        0.0
    } else {
        a2 * stable_k_integral(&model.spec().mu, u, rho, integrator)?
    };
    let a3 = model.a3(u);
    let finite = if a3 == 0.0 || !model.has_finite_jumps() {
        0.0
    } else {
        a3 * model
            .spec()
            .nu
            .atoms
            .iter()
            .map(|atom| atom.weight * k_rho_unchecked(u, atom.z, rho))
            .sum::<f64>()
    };
    Ok(diffusion + stable + finite)
}
