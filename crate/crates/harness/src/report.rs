//! Experiment results and their on-disk artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::HarnessError;

/// One pass/fail comparison of a measured value against a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    /// Human-readable acceptance rule, e.g. `<= 0.05`.
    pub tolerance: String,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, measured: f64, tolerance: impl Into<String>) -> Self {
        Check { name: name.into(), passed, measured, tolerance: tolerance.into(), detail: String::new() }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn at_most(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Check::new(name, measured <= limit, measured, format!("<= {limit}"))
    }

    pub fn at_least(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Check::new(name, measured >= limit, measured, format!(">= {limit}"))
    }
}

/// Column-major-free CSV table with string cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// CSV text preceded by `# key=value` header lines.
    pub fn to_csv(&self, header: &[(String, String)]) -> Result<String, HarnessError> {
        let mut out = String::new();
        for (k, v) in header {
            let _ = writeln!(out, "# {k}={v}");
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
        out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
        Ok(out)
    }
}

/// Formats a float with the shortest round-tripping representation.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub experiment: String,
    pub scenario: String,
    pub config_hash: String,
    pub table: Table,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    /// `(name, svg)`; written as `plot_<name>.svg`.
    pub plots: Vec<(String, String)>,
    /// `(name, bytes)`; written verbatim.
    pub blobs: Vec<(String, Vec<u8>)>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn header(&self) -> Vec<(String, String)> {
        vec![
            ("config_sha256".into(), self.config_hash.clone()),
            ("experiment".into(), self.experiment.clone()),
            ("scenario".into(), self.scenario.clone()),
        ]
    }

    pub fn results_csv(&self) -> Result<String, HarnessError> {
        self.table.to_csv(&self.header())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.header() {
            let _ = writeln!(s, "# {k}={v}");
        }
        for c in &self.checks {
            let _ = write!(
                s,
                "{} {}: measured {} (tolerance {})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                num(c.measured),
                c.tolerance
            );
            if !c.detail.is_empty() {
                let _ = write!(s, " [{}]", c.detail);
            }
            s.push('\n');
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        let _ = writeln!(s, "overall: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }

    /// Writes `results.csv`, `summary.txt`, plots and blobs into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: &str, bytes: &[u8]| -> Result<(), HarnessError> {
            let path = dir.join(name);
            fs::write(&path, bytes)?;
            written.push(path);
            Ok(())
        };
        put("results.csv", self.results_csv()?.as_bytes())?;
        put("summary.txt", self.summary().as_bytes())?;
        for (name, svg) in &self.plots {
            put(&format!("plot_{name}.svg"), svg.as_bytes())?;
        }
        for (name, bytes) in &self.blobs {
            put(name, bytes)?;
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_hash_header() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![num(0.1), num(2.0)]);
        let csv = t.to_csv(&[("config_sha256".into(), "abc".into())]).unwrap();
        assert_eq!(csv, "# config_sha256=abc\na,b\n0.1,2\n");
    }

    #[test]
    fn summary_lists_checks() {
        let r = Report {
            experiment: "rates".into(),
            checks: vec![Check::at_most("x", 1.0, 2.0), Check::at_least("y", 1.0, 2.0)],
            ..Report::default()
        };
        let s = r.summary();
        assert!(s.contains("PASS x"));
        assert!(s.contains("FAIL y"));
        assert!(s.ends_with("overall: FAIL\n"));
    }
}
