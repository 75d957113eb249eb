use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{LabError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Stamped into every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub schema_version: u32,
    pub git_describe: String,
    pub command: String,
    pub scenario: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(command: &str, scenario: &str, seed: u64) -> Self {
        Self {
            tool: format!("glue-lab {}", env!("CARGO_PKG_VERSION")),
            schema_version: SCHEMA_VERSION,
            git_describe: option_env!("GLUE_LAB_GIT_DESCRIBE").unwrap_or("unknown").to_string(),
            command: command.to_string(),
            scenario: scenario.to_string(),
            seed,
        }
    }

    pub fn header_lines(&self) -> Vec<String> {
        vec![
            format!("# tool: {}", self.tool),
            format!("# schema_version: {}", self.schema_version),
            format!("# git_describe: {}", self.git_describe),
            format!("# command: {}", self.command),
            format!("# scenario: {}", self.scenario),
            format!("# seed: {}", self.seed),
        ]
    }
}

/// Column names carry units in brackets, e.g. `eps [1]`.
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn write_csv(path: &Path, prov: &Provenance, table: &Table) -> Result<()> {
    let mut buf = Vec::new();
    for line in prov.header_lines() {
        writeln!(buf, "{line}").expect("write to Vec");
    }
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(&mut buf);
        w.write_record(&table.columns)?;
        for r in &table.rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| LabError::io(path, e))?;
    }
    std::fs::write(path, buf).map_err(|e| LabError::io(path, e))
}

/// Reads a table written by [`write_csv`], skipping the `#` header.
pub fn read_csv(path: &Path) -> Result<Table> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let columns = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(String::from).collect());
    }
    Ok(Table { columns, rows })
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    provenance: &'a Provenance,
    report: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, prov: &Provenance, report: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(&Envelope { provenance: prov, report })?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| LabError::io(path, e))
}

/// Files written by a run, in order.
#[derive(Debug, Default, Clone, Serialize)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
}
