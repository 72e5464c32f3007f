//! Per-replica tables, evaluations and their on-disk form.

use crate::config::ExperimentConfig;
use crate::LabError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

pub const LIBRARY_VERSION: &str = concat!("polymer-lab ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Values of `value` on rows whose `key` column equals `k`.
    pub fn select(&self, key: &str, k: f64, value: &str) -> Vec<f64> {
        let (Some(a), Some(b)) = (self.columns.iter().position(|c| c == key), self.columns.iter().position(|c| c == value)) else {
            return Vec::new();
        };
        self.rows.iter().filter(|r| r[a] == k).map(|r| r[b]).collect()
    }

    /// RFC 4180 with a header row and LF line endings; floats in shortest round-trip form.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), LabError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(name: &str, input: R) -> Result<Self, LabError> {
        let mut rd = csv::Reader::from_reader(input);
        let columns = rd.headers()?.iter().map(|s| s.to_string()).collect();
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| LabError::Config(format!("non-numeric cell `{s}` in {name}.csv"))))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Ok(Table { name: name.to_string(), columns, rows })
    }
}

/// Outcome of an experiment's acceptance predicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub summary: BTreeMap<String, f64>,
    pub predicate: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub experiment: String,
    pub tables: Vec<Table>,
    pub evaluation: Evaluation,
}

impl ResultSet {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn is_empty(&self) -> bool {
        self.tables.iter().all(|t| t.rows.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub library_version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub tolerances: BTreeMap<String, f64>,
    pub tables: Vec<String>,
}

/// Writes `<table>.csv` for every table, `summary.json` and `manifest.json` into the output directory.
pub fn persist(result: &ResultSet, config: &ExperimentConfig, tolerances: BTreeMap<String, f64>) -> Result<(), LabError> {
    let dir = &config.output.dir;
    fs::create_dir_all(dir)?;
    for t in &result.tables {
        t.write_csv(fs::File::create(dir.join(format!("{}.csv", t.name)))?)?;
    }
    if !result.tables.is_empty() {
        write_json(&dir.join("summary.json"), &result.evaluation)?;
    }
    let manifest = Manifest {
        library_version: LIBRARY_VERSION.to_string(),
        seed: config.seed,
        config: config.clone(),
        tolerances,
        tables: result.tables.iter().map(|t| t.name.clone()).collect(),
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), LabError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, LabError> {
    Ok(serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?)
}

pub fn read_tables(dir: &Path, names: &[String]) -> Result<Vec<Table>, LabError> {
    names.iter().map(|n| Table::read_csv(n, fs::File::open(dir.join(format!("{n}.csv")))?)).collect()
}
