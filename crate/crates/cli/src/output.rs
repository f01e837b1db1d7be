//! CSV time series and JSON run manifests.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// One CSV cell. Floats are written with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Float(f64),
    Count(u64),
}

impl Cell {
    fn render(self) -> String {
        match self {
            Self::Float(x) => format!("{x:.16e}"),
            Self::Count(n) => n.to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Self::Float(x)
    }
}

impl From<u64> for Cell {
    fn from(n: u64) -> Self {
        Self::Count(n)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Values of one column as floats.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match r[k] {
                    Cell::Float(x) => x,
                    Cell::Count(n) => n as f64,
                })
                .collect(),
        )
    }

    /// `#` comment line, header row, data rows; LF line endings.
    pub fn write_csv(&self, comment: &str, out: impl Write) -> csv::Result<()> {
        let mut out = out;
        writeln!(out, "# {comment}")?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.render()))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn sha256_hex(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value <= limit, value, limit, detail: detail.into() }
    }

    /// Passes only when `value < limit` strictly.
    pub fn below(name: &str, value: f64, limit: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value < limit, value, limit, detail: detail.into() }
    }

    pub fn at_least(name: &str, value: f64, limit: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value >= limit, value, limit, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub toolkit: String,
    pub version: String,
    pub scenario: String,
    pub config: serde_json::Value,
    pub config_sha256: String,
    /// Quantities computed from the configuration, e.g. decoherence times.
    pub derived: BTreeMap<String, f64>,
    pub outputs: BTreeMap<String, String>,
    pub wall_time_s: f64,
    pub checks: Vec<Check>,
    pub failed: Vec<String>,
    pub passed: bool,
    pub warnings: Vec<String>,
}
