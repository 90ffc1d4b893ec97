use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub nlbranch: String,
    pub nlbranch_cli: String,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            nlbranch: nlbranch::VERSION.to_string(),
            nlbranch_cli: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Everything needed to rerun a command: the echoed config has every
/// coefficient expression resolved and every CLI override applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub config: Option<RunConfig>,
    pub results: serde_json::Value,
    pub versions: Versions,
    pub wall_clock_s: f64,
}

impl Report {
    pub fn new(
        command: &str,
        config: Option<RunConfig>,
        results: serde_json::Value,
        elapsed: Duration,
    ) -> Self {
        Self {
            command: command.to_string(),
            config,
            results,
            versions: Versions::default(),
            wall_clock_s: elapsed.as_secs_f64(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is plain data");
        s.push('\n');
        s
    }
}
