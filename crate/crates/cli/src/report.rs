use std::fmt::Write as _;

use nalgebra::DMatrix;

/// Output layout of a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// `key value` lines.
    Kv,
    /// One JSON object `{"key": ..., "value": ...}` per line.
    JsonLines,
}

/// Ordered key/value report. Floats always print with 17 significant digits.
#[derive(Debug, Default)]
pub struct Report {
    entries: Vec<(String, String)>,
}

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn floats(vs: &[f64]) -> String {
    vs.iter().map(|&v| float(v)).collect::<Vec<_>>().join(" ")
}

impl Report {
    pub fn new(command: &str) -> Self {
        let mut r = Self::default();
        r.text("command", command);
        r
    }

    pub fn text(&mut self, key: impl Into<String>, value: impl Into<String>) -> &mut Self {
        self.entries.push((key.into(), value.into()));
        self
    }

    pub fn input(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.text(format!("input.{key}"), value)
    }

    pub fn float(&mut self, key: impl Into<String>, v: f64) -> &mut Self {
        self.text(key, float(v))
    }

    pub fn floats(&mut self, key: impl Into<String>, vs: &[f64]) -> &mut Self {
        self.text(key, floats(vs))
    }

    pub fn int(&mut self, key: impl Into<String>, v: usize) -> &mut Self {
        self.text(key, v.to_string())
    }

    pub fn matrix(&mut self, key: &str, m: &DMatrix<f64>) -> &mut Self {
        for i in 0..m.nrows() {
            let row: Vec<f64> = m.row(i).iter().copied().collect();
            self.floats(format!("{key}.row.{i}"), &row);
        }
        self
    }

    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            match format {
                Format::Kv => {
                    let _ = writeln!(out, "{k} {v}");
                }
                Format::JsonLines => {
                    let line = serde_json::json!({ "key": k, "value": v });
                    let _ = writeln!(out, "{line}");
                }
            }
        }
        out
    }
}
