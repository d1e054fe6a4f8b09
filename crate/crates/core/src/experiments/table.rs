//! Minimal CSV tables: comma-separated, no quoting, header row first.

use super::ExperimentError;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Output file name, e.g. `bias_sweep.csv`.
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(name: &str, text: &str) -> Result<Self, ExperimentError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| ExperimentError::Config(format!("{name}: empty table")))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, l) in lines.enumerate() {
            let row: Vec<String> = l.split(',').map(|s| s.trim().to_string()).collect();
            if row.len() != header.len() {
                return Err(ExperimentError::Config(format!(
                    "{name}: row {} has {} fields, header has {}",
                    i + 2,
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self {
            name: name.to_string(),
            header,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Result<usize, ExperimentError> {
        self.header.iter().position(|h| h == name).ok_or_else(|| {
            ExperimentError::Config(format!("{}: missing column `{name}`", self.name))
        })
    }

    /// Numeric cell; empty or unparsable cells read as NaN.
    pub fn num(&self, row: usize, col: usize) -> f64 {
        self.rows[row][col].parse().unwrap_or(f64::NAN)
    }

    pub fn text(&self, row: usize, col: usize) -> &str {
        &self.rows[row][col]
    }
}

/// Float formatting used in every table: shortest round-trip exponent form.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:e}")
    }
}
