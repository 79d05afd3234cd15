//! Output files. Every file carries the command, library version, seed, settings and scenario.

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::{CliError, Format};

#[derive(Debug, Clone)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(&'static str),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Text(s) => (*s).to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Float(v) => json!(v),
            Cell::Text(s) => json!(s),
        }
    }
}

/// 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct Writer {
    dir: PathBuf,
    format: Format,
    header: Map<String, Value>,
    written: Vec<PathBuf>,
}

impl Writer {
    pub fn new(dir: &Path, format: Format, command: &str, seed: u64, settings: Value, scenario: Value) -> Self {
        let mut header = Map::new();
        header.insert("command".into(), json!(command));
        header.insert("version".into(), json!(minerwealth::VERSION));
        header.insert("seed".into(), json!(seed));
        header.insert("settings".into(), settings);
        header.insert("scenario".into(), scenario);
        Self { dir: dir.to_path_buf(), format, header, written: Vec::new() }
    }

    pub fn finish(self) -> Vec<PathBuf> {
        self.written
    }

    fn write(&mut self, name: &str, contents: String) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    /// `<stem>.json` holding the header plus `result`.
    pub fn json(&mut self, stem: &str, result: Value) -> Result<(), CliError> {
        let mut doc = self.header.clone();
        doc.insert("result".into(), result);
        let mut text = serde_json::to_string_pretty(&Value::Object(doc)).expect("json serializes");
        text.push('\n');
        self.write(&format!("{stem}.json"), text)
    }

    /// `<stem>.csv` (one `#` metadata line, a header, then rows) or `<stem>.json` with `columns`/`rows`.
    pub fn table(&mut self, stem: &str, columns: &[&str], rows: &[Vec<Cell>]) -> Result<(), CliError> {
        match self.format {
            Format::Csv => {
                let meta = Value::Object(self.header.clone()).to_string();
                let mut text = format!("# {meta}\n{}\n", columns.join(","));
                for row in rows {
                    let line: Vec<String> = row.iter().map(Cell::csv).collect();
                    text.push_str(&line.join(","));
                    text.push('\n');
                }
                self.write(&format!("{stem}.csv"), text)
            }
            Format::Json => {
                let rows: Vec<Value> = rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
                self.json(stem, json!({ "columns": columns, "rows": rows }))
            }
        }
    }
}

/// Reads the metadata line back from a CSV written by [`Writer::table`].
pub fn csv_metadata(text: &str) -> Option<Value> {
    let first = text.lines().next()?.strip_prefix("# ")?;
    serde_json::from_str(first).ok()
}
