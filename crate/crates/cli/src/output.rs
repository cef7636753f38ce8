use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use crate::{CliError, Format};

/// A CSV table with a header row.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        Ok(fs::write(path, self.render())?)
    }
}

/// Formats a float so that it reads back exactly.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub struct Report {
    pub result: Value,
    pub table: Table,
}

/// JSON reports carry the resolved configuration next to the result; CSV
/// output echoes the configuration on standard error.
pub fn emit(config: &Value, report: Report, format: Format, path: Option<&Path>) -> Result<(), CliError> {
    let text = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&json!({"config": config, "result": report.result}))?;
            s.push('\n');
            s
        }
        Format::Csv => {
            eprintln!("config: {}", serde_json::to_string(config)?);
            report.table.render()
        }
    };
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}
