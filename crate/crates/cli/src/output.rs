//! CSV tables and the run manifest.

use std::path::Path;

use serde::Serialize;

use crate::CliError;

/// One CSV field.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::I(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

/// A named CSV file with a fixed header.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(file: &str, header: &[&'static str]) -> Self {
        Self {
            file: file.to_string(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len(), "{}", self.file);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| *h == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match &r[j] {
                    Cell::F(v) => *v,
                    Cell::I(v) => *v as f64,
                    Cell::S(_) => f64::NAN,
                })
                .collect(),
        )
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        let err = |e: csv::Error| CliError::Io {
            path: self.file.clone(),
            message: e.to_string(),
        };
        w.write_record(&self.header).map_err(err)?;
        for row in &self.rows {
            w.serialize(row).map_err(err)?;
        }
        w.into_inner().map_err(|e| CliError::Io {
            path: self.file.clone(),
            message: e.to_string(),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(&self.file);
        std::fs::write(&path, self.to_bytes()?).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub rows: usize,
    pub columns: Vec<&'static str>,
}

/// Everything needed to reproduce a run. Timestamps appear only here.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: String,
    pub seed: u64,
    pub threads: usize,
    pub deterministic_reduce: bool,
    pub config: &'a crate::config::ExperimentConfig,
    pub outputs: Vec<OutputEntry>,
    pub notes: serde_json::Map<String, serde_json::Value>,
    pub started_unix: u64,
    pub wall_time_s: f64,
}
