//! CSV reports with a commented metadata header.
//!
//! Header lines start with `# ` and carry `key: value` pairs. Only the
//! `created_unix` line depends on the wall clock; the body is a pure
//! function of the config and seed.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;

/// Formats a float so that it parses back to the same value.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-4 && v.abs() < 1e6) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// File stem; the report is written to `<name>.csv`.
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub meta: Vec<(String, String)>,
}

impl Report {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            meta: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|v| fmt_num(*v)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width of report {}", self.name);
        self.rows.push(row);
    }

    /// Column values parsed as floats (non-numeric cells become NaN).
    pub fn column(&self, name: &str) -> Vec<f64> {
        let Some(k) = self.columns.iter().position(|c| c == name) else {
            return Vec::new();
        };
        self.rows.iter().map(|r| r[k].parse().unwrap_or(f64::NAN)).collect()
    }

    /// CSV body: column header and rows.
    pub fn body(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `<dir>/<name>.csv` with `header` lines first, then the report's
    /// own metadata, then the body. Returns the file name.
    pub fn write(&self, dir: &Path, header: &[(String, String)]) -> Result<String> {
        let mut text = String::new();
        for (k, v) in header.iter().chain(&self.meta) {
            let _ = writeln!(text, "# {k}: {v}");
        }
        text.push_str(&self.body()?);
        let file = format!("{}.csv", self.name);
        fs::write(dir.join(&file), text)?;
        Ok(file)
    }
}

/// Splits a written report into header pairs and body text.
pub fn split_header(text: &str) -> (Vec<(String, String)>, String) {
    let mut meta = Vec::new();
    let mut body = String::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# ") {
            if let Some((k, v)) = rest.split_once(": ") {
                meta.push((k.to_string(), v.to_string()));
            }
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    (meta, body)
}
