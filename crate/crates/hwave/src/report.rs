//! Report serialization.
//!
//! A report is a JSON object with the run configuration, an overall
//! `passed` flag, one entry per check (`name`, `statement`, `tolerance`,
//! `margin`, `passed`, `detail`) and a free-form `values` object with the
//! measured constants.

use hwave_core::Report;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Serialize)]
pub struct CheckJson {
    pub name: String,
    pub statement: String,
    pub tolerance: f64,
    /// `null` when the margin is not finite.
    pub margin: Option<f64>,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportJson {
    pub command: String,
    pub space: String,
    pub delta: f64,
    pub mode: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckJson>,
    pub values: Map<String, Value>,
}

impl ReportJson {
    pub fn new(command: &str, space: &str, delta: f64, mode: &str, seed: u64, report: &Report, values: Map<String, Value>) -> Self {
        Self {
            command: command.to_string(),
            space: space.to_string(),
            delta,
            mode: mode.to_string(),
            seed,
            passed: report.all_passed(),
            checks: report
                .checks
                .iter()
                .map(|c| CheckJson {
                    name: c.name.clone(),
                    statement: c.statement.clone(),
                    tolerance: c.tolerance,
                    margin: c.margin.is_finite().then_some(c.margin),
                    passed: c.passed,
                    detail: c.detail.clone(),
                })
                .collect(),
            values,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// One line per check: `PASS|FAIL name margin detail`.
pub fn summary_lines(report: &Report) -> Vec<String> {
    report
        .checks
        .iter()
        .map(|c| {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            let mut line = format!("{tag} {:<32} margin {:>11.3e}", c.name, c.margin);
            if !c.detail.is_empty() {
                line.push_str("  ");
                line.push_str(&c.detail);
            }
            line
        })
        .collect()
}
