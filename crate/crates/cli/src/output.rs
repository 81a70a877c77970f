//! Tabular output with an embedded provenance header.
//!
//! Every emitted document carries the tool version, the command, and the full
//! resolved configuration (flag overrides already applied), so re-running the
//! embedded config reproduces the file byte for byte. Numbers are printed as
//! shortest round-trip decimals; CSV and JSON therefore carry identical
//! values.

use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F64(f64),
    U64(u64),
    Str(String),
    Null,
}

impl Cell {
    fn to_csv_field(&self) -> String {
        match self {
            Cell::F64(v) => format!("{v}"),
            Cell::U64(v) => format!("{v}"),
            Cell::Str(s) if s.contains([',', '\n', '"']) => {
                format!("\"{}\"", s.replace('"', "\"\""))
            }
            Cell::Str(s) => s.clone(),
            Cell::Null => String::new(),
        }
    }

    fn to_json_value(&self) -> Value {
        match self {
            Cell::F64(v) => json!(v),
            Cell::U64(v) => json!(v),
            Cell::Str(s) => json!(s),
            Cell::Null => Value::Null,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Meta {
    pub command: &'static str,
    pub seed: Option<u64>,
    /// Resolved configuration echo (after flag overrides).
    pub config: Value,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub meta: Meta,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(meta: Meta, columns: Vec<&'static str>) -> Self {
        Self {
            meta,
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "# tool: qkd3 {}\n# command: {}\n",
            env!("CARGO_PKG_VERSION"),
            self.meta.command
        ));
        if let Some(seed) = self.meta.seed {
            out.push_str(&format!("# seed: {seed}\n"));
        }
        out.push_str(&format!(
            "# config: {}\n",
            serde_json::to_string(&self.meta.config).expect("config serializes")
        ));
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(Cell::to_csv_field).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    fn to_json(&self) -> String {
        let mut meta = Map::new();
        meta.insert("tool".into(), json!("qkd3"));
        meta.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        meta.insert("command".into(), json!(self.meta.command));
        if let Some(seed) = self.meta.seed {
            meta.insert("seed".into(), json!(seed));
        }
        meta.insert("config".into(), self.meta.config.clone());
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut object = Map::new();
                for (name, cell) in self.columns.iter().zip(row) {
                    object.insert((*name).into(), cell.to_json_value());
                }
                Value::Object(object)
            })
            .collect();
        let doc = json!({ "meta": Value::Object(meta), "rows": rows });
        let mut text = serde_json::to_string_pretty(&doc).expect("document serializes");
        text.push('\n');
        text
    }
}

/// A row the command could not compute; reported on stderr and reflected in
/// the exit code.
#[derive(Debug, Clone)]
pub struct RowFailure {
    pub row: usize,
    pub message: String,
}
