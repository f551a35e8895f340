use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::config::Format;

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Bool(bool),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            // shortest round-trip form keeps output byte-stable
            Cell::Num(v) => format!("{v:?}"),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(v) => json!(v.to_string()),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
        }
    }
}

/// Result of a command: a table plus header notes and a verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    pub notes: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// `None` for commands that compute without checking.
    pub pass: Option<bool>,
}

impl Report {
    pub fn new(command: &str, seed: u64, columns: &[&str]) -> Self {
        Self {
            command: command.to_string(),
            seed,
            notes: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            pass: None,
        }
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn passed(&self) -> bool {
        self.pass.unwrap_or(true)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.csv(),
            Format::Json => self.json(),
        }
    }

    fn csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# command = {}", self.command);
        let _ = writeln!(out, "# seed = {}", self.seed);
        for (k, v) in &self.notes {
            let _ = writeln!(out, "# {k} = {v}");
        }
        if let Some(p) = self.pass {
            let _ = writeln!(out, "# pass = {p}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(Cell::csv).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    fn json(&self) -> String {
        let notes: Map<String, Value> = self.notes.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().map(Cell::json)).collect()))
            .collect();
        let doc = json!({
            "command": self.command,
            "seed": self.seed,
            "notes": notes,
            "pass": self.pass,
            "columns": self.columns,
            "rows": rows,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("report values serialize");
        s.push('\n');
        s
    }
}
