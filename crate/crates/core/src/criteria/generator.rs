//! Test functions and the generator `L` of the branching SDE.

use crate::error::{Error, Result};
use crate::model::{stable_constant, Support, ValidatedModel};
use crate::numerics::{Integrator, PowerShape};

/// Jumps below this fraction of `u` use the integral form of the
/// compensated increment instead of the raw difference.
const SMALL_JUMP_RATIO: f64 = 1e-2;

// Five-point Gauss-Legendre on [0, 1].
const GL5_NODES: [f64; 5] = [
    0.046_910_077_030_668_004,
    0.230_765_344_947_158_45,
    0.5,
    0.769_234_655_052_841_6,
    0.953_089_922_969_332,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.118_463_442_528_094_54,
    0.239_314_335_249_683_23,
    0.284_444_444_444_444_4,
    0.239_314_335_249_683_23,
    0.118_463_442_528_094_54,
];

/// A `C^2` function on `(0, inf)` to which the generator can be applied.
pub trait TestFunction: Sync {
    fn value(&self, u: f64) -> f64;
    fn d1(&self, u: f64) -> f64;
    fn d2(&self, u: f64) -> f64;

    /// `g(u + z) - g(u)`.
    fn jump_delta(&self, u: f64, z: f64) -> f64 {
        self.value(u + z) - self.value(u)
    }

    /// `g(u + z) - g(u) - z g'(u)`.
    fn compensated_jump(&self, u: f64, z: f64) -> f64 {
        if z <= SMALL_JUMP_RATIO * u {
            let integral: f64 = GL5_NODES
                .iter()
                .zip(GL5_WEIGHTS)
                .map(|(&v, w)| w * self.d2(u + v * z) * (1.0 - v))
                .sum();
            z * z * integral
        } else {
            self.jump_delta(u, z) - z * self.d1(u)
        }
    }
}

/// `g(u) = c`.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl TestFunction for Constant {
    fn value(&self, _u: f64) -> f64 {
        self.0
    }
    fn d1(&self, _u: f64) -> f64 {
        0.0
    }
    fn d2(&self, _u: f64) -> f64 {
        0.0
    }
    fn jump_delta(&self, _u: f64, _z: f64) -> f64 {
        0.0
    }
    fn compensated_jump(&self, _u: f64, _z: f64) -> f64 {
        0.0
    }
}

/// `g(u) = u`.
#[derive(Debug, Clone, Copy)]
pub struct Identity;

impl TestFunction for Identity {
    fn value(&self, u: f64) -> f64 {
        u
    }
    fn d1(&self, _u: f64) -> f64 {
        1.0
    }
    fn d2(&self, _u: f64) -> f64 {
        0.0
    }
    fn jump_delta(&self, _u: f64, z: f64) -> f64 {
        z
    }
    fn compensated_jump(&self, _u: f64, _z: f64) -> f64 {
        0.0
    }
}

/// `g(u) = ln u`.
#[derive(Debug, Clone, Copy)]
pub struct Log;

impl TestFunction for Log {
    fn value(&self, u: f64) -> f64 {
        u.ln()
    }
    fn d1(&self, u: f64) -> f64 {
        1.0 / u
    }
    fn d2(&self, u: f64) -> f64 {
        -1.0 / (u * u)
    }
    fn jump_delta(&self, u: f64, z: f64) -> f64 {
        super::first_order_increment(u, z)
    }
    fn compensated_jump(&self, u: f64, z: f64) -> f64 {
        -super::second_order_remainder(u, z)
    }
}

/// `g(u) = offset + (ln u)^-rho` for `u >= 3`.
///
/// Below 3 the function continues as the quartic in `u - 2` that matches
/// value, slope and curvature at 3 and is flat to second order at 2; below
/// 2 it is constant. The result is positive, decreasing and `C^2`.
#[derive(Debug, Clone, Copy)]
pub struct LogPower {
    rho: f64,
    offset: f64,
    // Quartic c0 + c3 s^3 + c4 s^4 in s = u - 2.
    c0: f64,
    c3: f64,
    c4: f64,
}

impl LogPower {
    pub fn new(rho: f64) -> Result<Self> {
        Self::with_offset(rho, 0.0)
    }

    pub fn with_offset(rho: f64, offset: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::Domain {
                name: "rho",
                value: rho,
                domain: "(0, inf)",
            });
        }
        let (g, g1, g2) = log_power_parts(3.0, rho);
        let c4 = g2 / 4.0 - g1 / 2.0;
        let c3 = g1 - g2 / 3.0;
        let c0 = g - c3 - c4;
        Ok(Self {
            rho,
            offset,
            c0,
            c3,
            c4,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

fn log_power_parts(u: f64, rho: f64) -> (f64, f64, f64) {
    let l = u.ln();
    let g = l.powf(-rho);
    let g1 = -rho * l.powf(-rho - 1.0) / u;
    let g2 = (rho * l.powf(-rho - 1.0) + rho * (rho + 1.0) * l.powf(-rho - 2.0)) / (u * u);
    (g, g1, g2)
}

impl TestFunction for LogPower {
    fn value(&self, u: f64) -> f64 {
        let core = if u >= 3.0 {
            u.ln().powf(-self.rho)
        } else if u > 2.0 {
            let s = u - 2.0;
            self.c0 + s * s * s * (self.c3 + self.c4 * s)
        } else {
            self.c0
        };
        self.offset + core
    }
    fn d1(&self, u: f64) -> f64 {
        if u >= 3.0 {
            log_power_parts(u, self.rho).1
        } else if u > 2.0 {
            let s = u - 2.0;
            s * s * (3.0 * self.c3 + 4.0 * self.c4 * s)
        } else {
            0.0
        }
    }
    fn d2(&self, u: f64) -> f64 {
        if u >= 3.0 {
            log_power_parts(u, self.rho).2
        } else if u > 2.0 {
            let s = u - 2.0;
            s * (6.0 * self.c3 + 12.0 * self.c4 * s)
        } else {
            0.0
        }
    }
}

/// Outcome of the finite-difference check on a test function's derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeCheck {
    pub d1_error: f64,
    pub d2_error: f64,
    pub passed: bool,
}

/// Compare `d1`, `d2` with central differences at step `1e-5 u`; each
/// must agree within `1e-4 (1 + |exact|)`.
pub fn check_derivatives<G: TestFunction + ?Sized>(g: &G, u: f64) -> DerivativeCheck {
    let h = 1e-5 * u;
    let fd1 = (g.value(u + h) - g.value(u - h)) / (2.0 * h);
    let fd2 = (g.d1(u + h) - g.d1(u - h)) / (2.0 * h);
    let d1 = g.d1(u);
    let d2 = g.d2(u);
    let d1_error = (d1 - fd1).abs();
    let d2_error = (d2 - fd2).abs();
    DerivativeCheck {
        d1_error,
        d2_error,
        passed: d1_error <= 1e-4 * (1.0 + d1.abs()) && d2_error <= 1e-4 * (1.0 + d2.abs()),
    }
}

/// `Lg(u)` with the default quadrature tolerance.
pub fn apply_generator<G: TestFunction + ?Sized>(
    model: &ValidatedModel,
    g: &G,
    u: f64,
) -> Result<f64> {
    apply_generator_with(model, g, u, &Integrator::default())
}

/// `Lg(u) = a0 g' + a1 g''/2 + a2 int_U [g(u+z) - g(u) - z g'(u)] mu(dz)
///          + a3 sum_j w_j [g(u + z_j) - g(u)]`.
pub fn apply_generator_with<G: TestFunction + ?Sized>(
    model: &ValidatedModel,
    g: &G,
    u: f64,
    integrator: &Integrator,
) -> Result<f64> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::Domain {
            name: "u",
            value: u,
            domain: "(0, inf)",
        });
    }
    let mut total = model.a0(u) * g.d1(u);
    let a1 = model.a1(u);
    if a1 != 0.0 {
        total += 0.5 * a1 * g.d2(u);
    }
    let a2 = model.a2(u);
    if a2 != 0.0 {
        let mu = model.spec().mu;
        let alpha = mu.alpha;
        let c = stable_constant(alpha);
        let f = |z: f64| c * z.powf(-1.0 - alpha) * g.compensated_jump(u, z);
        let r = match mu.support {
            // Linear growth of the compensated increment leaves z^-alpha at infinity.
            Support::Unbounded => integrator.semi_infinite(
                f,
                PowerShape {
                    split: u,
                    head_exponent: Some(1.0 - alpha),
                    tail_exponent: Some(-alpha),
                },
            )?,
            Support::UpTo { u_max } => integrator.head(f, u_max, Some(1.0 - alpha))?,
        };
        total += a2 * r.value;
    }
    if model.has_finite_jumps() {
        let a3 = model.a3(u);
        if a3 != 0.0 {
            let sum: f64 = model
                .spec()
                .nu
                .atoms
                .iter()
                .map(|atom| atom.weight * g.jump_delta(u, atom.z))
                .sum();
            total += a3 * sum;
        }
    }
    Ok(total)
}

/// `Lg(u)` through the Taylor-remainder form: jump terms written as
/// `z^2 int_0^1 g''(u + z v)(1 - v) dv` and `z int_0^1 g'(u + z v) dv`,
/// with every inner integral done by quadrature.
pub fn apply_generator_taylor<G: TestFunction + ?Sized>(
    model: &ValidatedModel,
    g: &G,
    u: f64,
    integrator: &Integrator,
) -> Result<f64> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::Domain {
            name: "u",
            value: u,
            domain: "(0, inf)",
        });
    }
    let inner_tol = Integrator::new((integrator.tol * 1e-2).max(1e-14));
    let mut total = model.a0(u) * g.d1(u) + 0.5 * model.a1(u) * g.d2(u);
    let a2 = model.a2(u);
    if a2 != 0.0 {
        let mu = model.spec().mu;
        let alpha = mu.alpha;
        let c = stable_constant(alpha);
        let mut failure = None;
        let f = |z: f64| {
            let inner = inner_tol.unit(|v| g.d2(u + z * v) * (1.0 - v));
            match inner {
                Ok(r) => c * z.powf(1.0 - alpha) * r.value,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        };
        let r = match mu.support {
            Support::Unbounded => integrator.semi_infinite(
                f,
                PowerShape {
                    split: u,
                    head_exponent: Some(1.0 - alpha),
                    tail_exponent: Some(-alpha),
                },
            )?,
            Support::UpTo { u_max } => integrator.head(f, u_max, Some(1.0 - alpha))?,
        };
        if let Some(e) = failure {
            return Err(e.into());
        }
        total += a2 * r.value;
    }
    if model.has_finite_jumps() {
        let a3 = model.a3(u);
        if a3 != 0.0 {
            let mut sum = 0.0;
            for atom in &model.spec().nu.atoms {
                let z = atom.z;
                let inner = inner_tol.unit(|v| g.d1(u + z * v))?;
                sum += atom.weight * z * inner.value;
            }
            total += a3 * sum;
        }
    }
    Ok(total)
}
