//! Special functions, adaptive quadrature and counter-based random streams.

mod gamma;
mod quad;
mod rng;

pub use gamma::gamma;
pub(crate) use gamma::gamma_positive;
pub use quad::{
    integrate_semiinfinite, integrate_unit, Integrator, PowerShape, QuadResult, DEFAULT_MAX_EVALS,
};
pub use rng::{RngStream, POISSON_INVERSION_CUTOFF};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("{name} = {value} is outside the domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error(
        "quadrature did not converge within {} evaluations (value {}, error estimate {})",
        partial.evaluations, partial.value, partial.abs_error_estimate
    )]
    NoConvergence { partial: QuadResult },
    #[error("integrand returned {value} at {at}")]
    NonFinite { at: f64, value: f64 },
}
