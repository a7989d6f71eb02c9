//! JSON run reports.
//!
//! Field order is fixed and maps are sorted, so two runs with the same
//! configuration and seed serialize identically except for the final
//! `wall_clock_seconds` line. Non-finite numbers are written as `null`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: &'static str,
    pub generator: String,
    pub command: String,
    pub seed: u64,
    /// Effective configuration, defaults included.
    pub config: BTreeMap<String, String>,
    pub results: Value,
    pub diagnostics: Diagnostics,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clipped_mass: Option<f64>,
    pub degenerate: bool,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(
        command: &str,
        seed: u64,
        config: BTreeMap<String, String>,
        results: Value,
        diagnostics: Diagnostics,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            generator: format!("hdustat {}", env!("CARGO_PKG_VERSION")),
            command: command.to_string(),
            seed,
            config,
            results,
            diagnostics,
            wall_clock_seconds: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s =
            serde_json::to_string_pretty(self).expect("report values are always serializable");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_json())
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
    }
}

/// Serializes a result value; used for the `results` section.
pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result types are always serializable")
}

/// Drops the wall-clock line, leaving the deterministic part of a report.
pub fn strip_wall_clock(json: &str) -> String {
    json.lines()
        .filter(|l| !l.trim_start().starts_with("\"wall_clock_seconds\""))
        .collect::<Vec<_>>()
        .join("\n")
}
