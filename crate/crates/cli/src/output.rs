//! Result tables, written as CSV or JSON, and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::config::{Format, RunConfig};
use crate::Failure;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl Cell {
    /// Floats carry 17 significant digits so a replay can compare bytes.
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => Value::String(format!("{v:.16e}")),
            Cell::Int(v) => Value::from(*v),
            Cell::Bool(v) => Value::Bool(*v),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<u8> for Cell {
    fn from(v: u8) -> Self {
        Cell::Int(v as i64)
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

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&'static str]) -> Self {
        Self { name: name.to_string(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn to_csv(&self) -> Result<Vec<u8>, Failure> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        w.into_inner().map_err(|e| Failure::Io(e.to_string()))
    }

    fn to_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self.columns.iter().zip(row).map(|(c, v)| (c.to_string(), v.json())).collect();
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }
}

fn io<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Io(e.to_string())
}

/// Writes each table as `<name>.csv`, or all of them into `results.json`.
/// Returns the file names, relative to `dir`.
pub fn write_tables(dir: &Path, tables: &[Table], format: Format) -> Result<Vec<String>, Failure> {
    fs::create_dir_all(dir).map_err(io)?;
    match format {
        Format::Csv => tables
            .iter()
            .map(|t| {
                let name = format!("{}.csv", t.name);
                fs::write(dir.join(&name), t.to_csv()?).map_err(io)?;
                Ok(name)
            })
            .collect(),
        Format::Json => {
            let obj: Map<String, Value> = tables.iter().map(|t| (t.name.clone(), t.to_json())).collect();
            let mut text = serde_json::to_string_pretty(&Value::Object(obj)).map_err(io)?;
            text.push('\n');
            fs::write(dir.join("results.json"), text).map_err(io)?;
            Ok(vec!["results.json".to_string()])
        }
    }
}

/// Everything needed to replay a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    pub threads: Option<usize>,
    pub discretization: Option<relfk_core::Discretization>,
    /// The configuration after command-line overrides.
    pub config: RunConfig,
    pub outputs: Vec<String>,
    pub wall_time_seconds: f64,
    pub passed: bool,
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf, Failure> {
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(manifest).map_err(io)?;
    text.push('\n');
    fs::write(&path, text).map_err(io)?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<Manifest, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Schema(format!("{}: {e}", path.display())))
}
