//! Fixture models shared by the benchmarks.

use nlbranch::{gamma, ModelSpec, RateFunction, ValidatedModel};

/// Critical pure-jump model with `r2 = alpha`.
pub fn critical_jump(alpha: f64) -> ValidatedModel {
    let g = gamma(alpha).expect("alpha in (1, 2)");
    ModelSpec::power_law(alpha, [(g, 1.0), (0.0, 0.0), (1.0, alpha)])
        .validate()
        .expect("valid fixture")
}

/// Critical diffusion plus jumps; exercises every term of the scheme.
pub fn critical_mixed(alpha: f64) -> ValidatedModel {
    let g = gamma(alpha).expect("alpha in (1, 2)");
    ModelSpec::power_law(alpha, [(1.0 + g, 1.0), (2.0, 2.0), (1.0, alpha)])
        .validate()
        .expect("valid fixture")
}

/// Tabulated rates; forces the numeric classification path.
pub fn tabulated(alpha: f64) -> ValidatedModel {
    let knots = |scale: f64, r: f64| {
        (-6..=8)
            .map(|k| {
                let u = 10f64.powi(k);
                (u, scale * u.powf(r))
            })
            .collect()
    };
    let mut spec = ModelSpec::power_law(alpha, [(1.0, 1.0), (0.0, 0.0), (0.0, 0.0)]);
    spec.a1 = RateFunction::tabulated(knots(2.0, 2.0));
    spec.a2 = RateFunction::tabulated(knots(0.5, alpha));
    spec.validate().expect("valid fixture")
}
