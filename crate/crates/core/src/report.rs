//! Structured pass/fail diagnostics written as JSON.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    pub tolerance: f64,
    /// Step (or index) where `value` is attained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<u64>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub detail: serde_json::Value,
}

impl Check {
    /// Passes when `value <= tolerance`.
    pub fn upper(name: impl Into<String>, value: f64, tolerance: f64, location: Option<u64>) -> Self {
        Check {
            name: name.into(),
            passed: value <= tolerance,
            value,
            tolerance,
            location,
            detail: serde_json::Value::Null,
        }
    }

    pub fn with_detail(mut self, detail: impl Serialize) -> Self {
        self.detail = serde_json::to_value(detail).unwrap_or(serde_json::Value::Null);
        self
    }

    pub fn with_passed(mut self, passed: bool) -> Self {
        self.passed = passed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub kind: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub outputs: Vec<String>,
}

impl ExperimentReport {
    pub fn new(name: &str, kind: &str, checks: Vec<Check>, outputs: Vec<String>) -> Self {
        ExperimentReport {
            name: name.to_string(),
            kind: kind.to_string(),
            passed: checks.iter().all(|c| c.passed),
            checks,
            outputs,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub passed: bool,
    pub experiments: Vec<ExperimentReport>,
}

impl RunReport {
    pub fn new(seed: Option<u64>, experiments: Vec<ExperimentReport>) -> Self {
        RunReport {
            tool: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            schema_version: crate::config::SCHEMA_VERSION,
            seed,
            passed: experiments.iter().all(|e| e.passed),
            experiments,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}
