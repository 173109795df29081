//! CSV and JSON emission with a reproducibility preamble.
//!
//! Every CSV starts with `#` comment lines: the command, an optional
//! generation timestamp, the fully resolved configuration as JSON, and any
//! command-specific notes. Everything except the timestamp is a pure function
//! of the configuration and seed.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Output file (defaults to standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Omit the timestamp header line.
    #[arg(long)]
    pub no_timestamp: bool,
}

pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new(), notes: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }
}

/// Formats a float with the shortest representation that round-trips.
pub fn num(x: f64) -> String {
    format!("{x}")
}

fn preamble(command: &str, config: &impl Serialize, timestamp: bool) -> Result<String> {
    let mut s = format!("# polarmac {command}\n");
    if timestamp {
        s.push_str(&format!("# generated {}\n", chrono::Utc::now().to_rfc3339()));
    }
    let cfg = serde_json::to_string(config).map_err(|e| CliError::Config(e.to_string()))?;
    s.push_str(&format!("# config {cfg}\n"));
    Ok(s)
}

pub fn render_csv(command: &str, config: &impl Serialize, timestamp: bool, table: &Table) -> Result<Vec<u8>> {
    let mut buf = preamble(command, config, timestamp)?.into_bytes();
    for n in &table.notes {
        buf.extend_from_slice(format!("# {n}\n").as_bytes());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Config(e.to_string());
    w.write_record(&table.columns).map_err(io)?;
    for r in &table.rows {
        w.write_record(r).map_err(io)?;
    }
    buf.extend(w.into_inner().map_err(|e| CliError::Config(e.to_string()))?);
    Ok(buf)
}

pub fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|source| CliError::Io { path: p.to_path_buf(), source }),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source }),
    }
}

pub fn emit_csv(command: &str, config: &impl Serialize, out: &OutputArgs, table: &Table) -> Result<()> {
    write_bytes(out.out.as_deref(), &render_csv(command, config, !out.no_timestamp, table)?)
}

pub fn json_bytes(value: &impl Serialize) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}
