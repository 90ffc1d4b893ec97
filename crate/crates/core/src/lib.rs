//! Boundary behaviour of continuous-state nonlinear branching processes:
//! criteria for extinction, explosion, coming down from infinity and
//! staying infinite, plus a jump-SDE simulator and Monte Carlo estimators
//! to check them against.

// `!(x > 0.0)` is deliberate: it rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Quadrature nodes and Lanczos coefficients are kept as published.
#![allow(clippy::excessive_precision)]

pub mod criteria;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod numerics;
pub mod selftest;
pub mod simulator;

pub use criteria::{classify, BoundaryReport, CriteriaConfig, InfinityBehavior, Method, Verdict};
pub use error::{Error, Result};
pub use model::{
    critical_deficit, validate, Atom, CriticalityCheck, FiniteMeasure, ModelError, ModelSpec,
    RateFunction, StableMeasure, Support, ValidatedModel,
};
pub use numerics::{gamma, QuadResult, RngStream};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
