//! Result tables, JSON rendering and the fixed-width human view.

use serde::Serialize;
use serde_json::{Map, Value};

pub const TOOL: &str = "codesign-lab";

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Text(String),
    Int(u64),
    Float(f64),
    Null,
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Null, Into::into)
    }
}

/// Column keys carry their unit as a suffix (`_us`, `_bytes`, `_gflops`).
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn cell(&self, row: usize, column: &str) -> Option<&Cell> {
        let c = self.columns.iter().position(|k| k == column)?;
        self.rows.get(row)?.get(c)
    }

    fn to_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(r)
                    .map(|(k, v)| (k.clone(), serde_json::to_value(v).expect("cell")))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let mut t = Map::new();
        t.insert("name".into(), Value::String(self.name.clone()));
        t.insert("rows".into(), Value::Array(rows));
        Value::Object(t)
    }

    pub fn render(&self) -> String {
        let body: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(display).collect()).collect();
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.len()).collect();
        for r in &body {
            for (w, s) in widths.iter_mut().zip(r) {
                *w = (*w).max(s.len());
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect();
            parts.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = format!("== {} ==\n", self.name);
        out += &line(&self.columns);
        for r in &body {
            out += &line(r);
        }
        out
    }
}

/// Five significant digits, `%g` style.
pub fn sig5(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.4e}");
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..5).contains(&exp) {
        let decimals = (4 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mant.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn display(c: &Cell) -> String {
    match c {
        Cell::Text(s) => s.clone(),
        Cell::Int(v) => v.to_string(),
        Cell::Float(v) => sig5(*v),
        Cell::Null => "-".into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    pub config: Value,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn to_json(&self) -> Value {
        let mut seeds = Map::new();
        seeds.insert("seed".into(), self.seed.into());
        let mut root = Map::new();
        root.insert("tool".into(), TOOL.into());
        root.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        root.insert("command".into(), self.command.clone().into());
        root.insert("seeds".into(), Value::Object(seeds));
        root.insert("config".into(), self.config.clone());
        root.insert("tables".into(), Value::Array(self.tables.iter().map(Table::to_json).collect()));
        Value::Object(root)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("report json");
        s.push('\n');
        s
    }

    pub fn render(&self) -> String {
        let mut out = format!("{TOOL} {} {} (seed {})\n", env!("CARGO_PKG_VERSION"), self.command, self.seed);
        for t in &self.tables {
            out.push('\n');
            out += &t.render();
        }
        out
    }
}
