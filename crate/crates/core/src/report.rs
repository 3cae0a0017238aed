//! Machine-readable reports and CSV exports.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Tolerance or error budget the residual is judged against; none for
    /// rows that only report.
    pub budget: Option<f64>,
    pub pass: bool,
}

impl ResultRow {
    /// Row that passes when |lhs - rhs| ≤ budget.
    pub fn compare(name: impl Into<String>, lhs: f64, rhs: f64, budget: f64) -> Self {
        let residual = (lhs - rhs).abs();
        ResultRow { name: name.into(), lhs, rhs, residual, budget: Some(budget), pass: residual <= budget }
    }

    /// Row for a residual computed elsewhere; rhs is the target 0.
    pub fn residual(name: impl Into<String>, residual: f64, budget: f64) -> Self {
        ResultRow { name: name.into(), lhs: residual, rhs: 0.0, residual, budget: Some(budget), pass: residual <= budget }
    }

    /// Row that reports without judging.
    pub fn info(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        ResultRow { name: name.into(), lhs, rhs, residual: (lhs - rhs).abs(), budget: None, pass: true }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        ResultRow { name: name.into(), lhs: v, rhs: 1.0, residual: 1.0 - v, budget: Some(0.0), pass: ok }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub inputs_digest: String,
    pub results: Vec<ResultRow>,
    pub versions: String,
    /// Command-specific structured output.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

impl Report {
    pub fn new(command: &str, inputs: &[u8], results: Vec<ResultRow>) -> Self {
        Report {
            command: command.into(),
            inputs_digest: digest(inputs),
            results,
            versions: version_stamp(),
            details: serde_json::Value::Null,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn version_stamp() -> String {
    format!("herglotz-core {}", env!("CARGO_PKG_VERSION"))
}

/// CSV text: a `#` metadata line, a header, then rows.
pub fn csv_text(meta: &str, header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = String::new();
    s.push_str("# ");
    s.push_str(meta);
    s.push('\n');
    s.push_str(&header.join(","));
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Writes through a temporary file and a rename, so readers never see a
/// half-written file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("partial");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
