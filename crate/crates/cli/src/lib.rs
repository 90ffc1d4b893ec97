//! Command-line front end for `nlbranch`: config parsing, command
//! dispatch and report serialization. The binary is a thin wrapper over
//! [`run`].

pub mod commands;
pub mod config;
pub mod grid;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use commands::run;
pub use config::{Coef, Format, RunConfig};
pub use report::Report;

/// Stable exit-code contract.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const NUMERIC: i32 = 2;
    pub const SELFTEST: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("selftest failed: {0}")]
    Selftest(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => exit::CONFIG,
            CliError::Numeric(_) => exit::NUMERIC,
            CliError::Selftest(_) => exit::SELFTEST,
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

// Bad inputs surface as model or precondition errors; the rest means a
// computation went wrong on valid input.
impl From<nlbranch::Error> for CliError {
    fn from(e: nlbranch::Error) -> Self {
        match e {
            nlbranch::Error::Model(_) | nlbranch::Error::Precondition(_) => {
                CliError::Config(e.to_string())
            }
            nlbranch::Error::Numerics(_) | nlbranch::Error::Domain { .. } => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nlbranch", version, about = "Boundary behavior of nonlinear branching processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides `mc.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `mc.threads` (0 = all cores).
    #[arg(long, global = true, env = "NLBRANCH_THREADS")]
    pub threads: Option<usize>,
    /// Overrides `output.path`; stdout when neither is set.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Overrides `output.format`.
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Criteria verdicts with the evidence grid.
    Classify,
    /// One path from x0 over the horizon, as (t, x) rows.
    Simulate {
        #[arg(long)]
        x0: Option<f64>,
    },
    /// Monte Carlo estimate of P_x0{tau_a^- < t}.
    Passage {
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
    },
    /// Predicted vs estimated behavior over a CSV parameter grid.
    Sweep {
        /// Overrides `sweep.grid`.
        #[arg(long, value_name = "PATH")]
        grid: Option<PathBuf>,
    },
    /// Invariant battery; exits 3 on any failed check.
    Selftest {
        /// Debug hook: multiply c_alpha in the identity check.
        #[arg(long, hide = true, default_value_t = 1.0)]
        c_alpha_scale: f64,
    },
}
