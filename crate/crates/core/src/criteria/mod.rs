//! Boundary-behaviour criteria: `phi`, `K_rho`, `H_rho`, the generator, and
//! the classifier built on them.

mod classify;
mod functions;
mod generator;

pub use classify::{
    classify, power_sum_signs, BoundaryReport, CriteriaConfig, Evidence, InfinityBehavior,
    LargeSample, Method, Sign, SmallSample, Verdict, RHO_SCAN,
};
pub use functions::{
    first_order_increment, h_rho, h_rho_with, k_integral_bounds, k_rho, k_rho_by_remainder,
    k_shape, phi, phi_by_quadrature, phi_terms, phi_with, second_order_remainder,
    stable_k_integral, stable_second_order, stable_second_order_quadrature, KBounds, PhiTerms,
    K_SERIES_THRESHOLD,
};
pub use generator::{
    apply_generator, apply_generator_taylor, apply_generator_with, check_derivatives, Constant,
    DerivativeCheck, Identity, Log, LogPower, TestFunction,
};
