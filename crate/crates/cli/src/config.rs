//! Run configuration: a TOML document with `model`, `sim`, `mc`,
//! `criteria`, `output` and per-command sections.
//!
//! Rate coefficients `b` accept a number or one of two expressions,
//! `"gamma(alpha)"` and `"b0/gamma(alpha)"`, so exactly critical models
//! can be written without decimal truncation.

use serde::{Deserialize, Serialize};

use nlbranch::criteria::CriteriaConfig;
use nlbranch::montecarlo::McConfig;
use nlbranch::simulator::SimConfig;
use nlbranch::{
    gamma, Atom, FiniteMeasure, ModelSpec, RateFunction, StableMeasure, Support, ValidatedModel,
};

use crate::CliError;

/// A coefficient: a literal or one of the supported expressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coef {
    Value(f64),
    Expr(String),
}

impl Coef {
    /// Resolve against `alpha` and, for `b0/gamma(alpha)`, the resolved `b0`.
    pub fn resolve(&self, field: &str, alpha: f64, b0: Option<f64>) -> Result<f64, CliError> {
        match self {
            Coef::Value(v) => Ok(*v),
            Coef::Expr(e) => {
                let compact: String = e.chars().filter(|c| !c.is_whitespace()).collect();
                let g = || {
                    gamma(alpha)
                        .map_err(|err| CliError::Config(format!("{field}: {err}")))
                };
                match compact.as_str() {
                    "gamma(alpha)" => g(),
                    "b0/gamma(alpha)" => match b0 {
                        Some(b0) => Ok(b0 / g()?),
                        None => Err(CliError::Config(format!(
                            "{field}: \"b0/gamma(alpha)\" is only allowed where b0 is known"
                        ))),
                    },
                    _ => Err(CliError::Config(format!(
                        "{field}: unsupported expression {e:?}; use a number, \"gamma(alpha)\" or \"b0/gamma(alpha)\""
                    ))),
                }
            }
        }
    }
}

/// A rate function: `b u^r`, or a table of `[u, value]` knots.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Coef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub z: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub alpha: f64,
    /// Upper end of `U`; absent means `U = (0, inf)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_max: Option<f64>,
    pub a0: RateConfig,
    #[serde(default)]
    pub a1: RateConfig,
    #[serde(default)]
    pub a2: RateConfig,
    #[serde(default)]
    pub a3: RateConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nu: Vec<AtomConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub format: Format,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PassageConfig {
    pub x0: Option<f64>,
    pub a: Option<f64>,
    pub t: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub x0: Option<f64>,
    /// Traces longer than this are thinned to at most this many points.
    pub max_points: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            x0: None,
            max_points: 10_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// CSV grid file, relative to the working directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub criteria: CriteriaConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub passage: PassageConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

impl RunConfig {
    /// Parse TOML; syntax and type errors carry line and column.
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// The same configuration with every coefficient expression replaced
    /// by its value.
    pub fn resolved(&self) -> Result<Self, CliError> {
        let mut out = self.clone();
        let alpha = self.model.alpha;
        let b0 = resolve_b(&self.model.a0, "model.a0.b", alpha, None)?;
        for (rate, name) in [
            (&mut out.model.a0, "model.a0.b"),
            (&mut out.model.a1, "model.a1.b"),
            (&mut out.model.a2, "model.a2.b"),
            (&mut out.model.a3, "model.a3.b"),
        ] {
            if let Some(b) = &rate.b {
                rate.b = Some(Coef::Value(b.resolve(name, alpha, b0)?));
            }
        }
        Ok(out)
    }

    pub fn model_spec(&self) -> Result<ModelSpec, CliError> {
        let m = &self.model;
        let alpha = m.alpha;
        let b0 = resolve_b(&m.a0, "model.a0.b", alpha, None)?;
        let rate = |cfg: &RateConfig, name: &str| rate_function(cfg, name, alpha, b0);
        let support = match m.u_max {
            None => Support::Unbounded,
            Some(u_max) => Support::UpTo { u_max },
        };
        Ok(ModelSpec {
            a0: rate(&m.a0, "model.a0")?,
            a1: rate(&m.a1, "model.a1")?,
            a2: rate(&m.a2, "model.a2")?,
            a3: rate(&m.a3, "model.a3")?,
            mu: StableMeasure { alpha, support },
            nu: FiniteMeasure::new(
                m.nu.iter()
                    .map(|a| Atom {
                        z: a.z,
                        weight: a.weight,
                    })
                    .collect(),
            ),
        })
    }

    /// Build and validate the model; validation failures name the field.
    pub fn validated_model(&self) -> Result<ValidatedModel, CliError> {
        self.model_spec()?
            .validate()
            .map_err(|e| CliError::Config(format!("model: {e} [{}]", e.code())))
    }

    /// Check the non-model sections.
    pub fn check_sections(&self) -> Result<(), CliError> {
        self.sim
            .validate()
            .map_err(|e| CliError::Config(format!("sim: {e}")))?;
        self.criteria
            .validate()
            .map_err(|e| CliError::Config(format!("criteria: {e}")))?;
        if self.simulate.max_points < 2 {
            return Err(CliError::Config("simulate.max_points: must be at least 2".into()));
        }
        Ok(())
    }
}

fn resolve_b(
    cfg: &RateConfig,
    field: &str,
    alpha: f64,
    b0: Option<f64>,
) -> Result<Option<f64>, CliError> {
    cfg.b.as_ref().map(|b| b.resolve(field, alpha, b0)).transpose()
}

fn rate_function(
    cfg: &RateConfig,
    name: &str,
    alpha: f64,
    b0: Option<f64>,
) -> Result<RateFunction, CliError> {
    match (&cfg.b, cfg.r, &cfg.knots) {
        (None, None, None) => Ok(RateFunction::zero()),
        (Some(b), r, None) => Ok(RateFunction::power(
            b.resolve(&format!("{name}.b"), alpha, b0)?,
            r.unwrap_or(0.0),
        )),
        (None, None, Some(knots)) => Ok(RateFunction::tabulated(
            knots.iter().map(|k| (k[0], k[1])).collect(),
        )),
        (None, Some(_), None) => Err(CliError::Config(format!(
            "{name}: exponent r given without coefficient b"
        ))),
        _ => Err(CliError::Config(format!(
            "{name}: give either b (and r) or knots, not both"
        ))),
    }
}
