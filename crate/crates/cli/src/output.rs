use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::{Format, RunConfig};

/// Provenance carried by every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub command: String,
    pub config_hash: String,
    pub tol: f64,
    pub slope_tol: f64,
    pub cluster_tol: f64,
}

impl Header {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Header {
            command: command.to_string(),
            config_hash: cfg.hash(),
            tol: cfg.run.tol,
            slope_tol: cfg.run.slope_tol,
            cluster_tol: cfg.run.cluster_tol,
        }
    }

    fn comment(&self) -> String {
        format!(
            "# stiffflex {} config_hash={} tol={:e} slope_tol={:e} cluster_tol={:e}\n",
            self.command, self.config_hash, self.tol, self.slope_tol, self.cluster_tol
        )
    }
}

/// A table cell; floats are written with 17 significant digits.
#[derive(Debug, Clone)]
pub enum Cell {
    Int(usize),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Int(i) => (*i).into(),
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(serde_json::Value::Null, Into::into),
            Cell::Text(s) => s.clone().into(),
            Cell::Empty => serde_json::Value::Null,
        }
    }
}

pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn to_csv(&self, header: &Header) -> String {
        let mut s = header.comment();
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    fn to_json(&self, header: &Header) -> Result<String> {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|r| self.columns.iter().map(|c| c.to_string()).zip(r.iter().map(Cell::json)).collect())
            .collect();
        json_document(header, "rows", &rows)
    }
}

/// `{"header": ..., key: body}` pretty-printed.
pub fn json_document<T: Serialize>(header: &Header, key: &str, body: &T) -> Result<String> {
    let mut map = serde_json::Map::new();
    map.insert("header".into(), serde_json::to_value(header)?);
    map.insert(key.into(), serde_json::to_value(body)?);
    let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(map))?;
    s.push('\n');
    Ok(s)
}

pub struct Writer {
    dir: PathBuf,
    format: Format,
    pub written: Vec<PathBuf>,
}

impl Writer {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        fs::create_dir_all(&cfg.output.dir).with_context(|| format!("cannot create {}", cfg.output.dir.display()))?;
        Ok(Writer {
            dir: cfg.output.dir.clone(),
            format: cfg.output.format,
            written: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    /// Writes `stem.csv` or `stem.json` according to the configured format.
    pub fn table(&mut self, stem: &str, header: &Header, table: &Table) -> Result<()> {
        match self.format {
            Format::Csv => self.put(&format!("{stem}.csv"), &table.to_csv(header)),
            Format::Json => self.put(&format!("{stem}.json"), &table.to_json(header)?),
        }
    }

    pub fn json<T: Serialize>(&mut self, name: &str, header: &Header, key: &str, body: &T) -> Result<()> {
        self.put(name, &json_document(header, key, body)?)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}
