//! Result tables and their on-disk form: a CSV of records plus a JSON
//! sidecar with run metadata. Both are written to a temporary file in the
//! destination directory and renamed into place.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }

    pub fn to_csv(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| CliError::input(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::input(format!("csv: {e}"))
}

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config: BTreeMap<&'static str, String>,
    pub records: String,
    pub record_count: usize,
    pub wall_clock_seconds: f64,
    pub warnings: Vec<String>,
}

impl Meta {
    pub fn new(cfg: &RunConfig, table: &Table, wall_clock_seconds: f64, warnings: Vec<String>) -> Self {
        Self {
            tool: "epiboot",
            version: env!("CARGO_PKG_VERSION"),
            command: cfg.command.name(),
            seed: cfg.seed,
            config: cfg.entries().into_iter().collect(),
            records: cfg.out.display().to_string(),
            record_count: table.rows.len(),
            wall_clock_seconds,
            warnings,
        }
    }
}

/// `<out>.meta.json`.
pub fn meta_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    out.with_file_name(name)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let io = |e: std::io::Error| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Writes the record CSV, then its metadata sidecar.
pub fn write_envelope(cfg: &RunConfig, table: &Table, meta: &Meta) -> CliResult<()> {
    write_atomic(&cfg.out, &table.to_csv()?)?;
    let json = serde_json::to_vec_pretty(meta).map_err(|e| CliError::input(e.to_string()))?;
    write_atomic(&meta_path(&cfg.out), &json)
}
