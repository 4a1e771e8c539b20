//! Artifact emission: CSV tables with full-precision floats and JSON
//! summaries that round-trip the in-memory reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fraclab_core::{Error, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

/// Which artifacts a run writes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Both,
    None,
}

impl Format {
    pub fn parse(text: &str) -> Result<Format> {
        match text {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "both" => Ok(Format::Both),
            "none" => Ok(Format::None),
            other => Err(Error::Domain(format!(
                "unknown format '{other}'; use csv, json, both, or none"
            ))),
        }
    }

    pub fn wants_csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn wants_json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

/// The JSON summary written next to each CSV: the command, the fully
/// populated config it ran under, and the report itself.
#[derive(Serialize)]
pub struct Summary<R: Serialize> {
    pub command: String,
    pub operator: String,
    pub config: ExperimentConfig,
    pub report: R,
    pub pass: bool,
}

/// One table cell; floats carry 17 significant digits so the CSV
/// round-trips doubles losslessly.
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Str(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(v) => fmt_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Str(v) => v.clone(),
        }
    }
}

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Resolves the output directory: explicit flag, then config, then the
/// FRACLAB_OUT_DIR environment variable, then the working directory.
pub fn resolve_out_dir(flag: Option<PathBuf>, config: Option<PathBuf>) -> PathBuf {
    flag.or(config)
        .or_else(|| std::env::var_os("FRACLAB_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|e| Error::Domain(format!("cannot create {}: {e}", dir.display())))?;
        }
    }
    std::fs::write(path, text)
        .map_err(|e| Error::Domain(format!("cannot write {}: {e}", path.display())))
}

/// Writes a CSV table: header row, `.` decimals, `,` separators.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "{}", header.join(","));
    for row in rows {
        let cells: Vec<String> = row.iter().map(Cell::render).collect();
        let _ = writeln!(text, "{}", cells.join(","));
    }
    write_text(path, &text)
}

/// Writes the JSON summary, pretty-printed with a trailing newline.
pub fn write_json<R: Serialize>(path: &Path, summary: &Summary<R>) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)
        .map_err(|e| Error::Domain(format!("cannot serialize summary: {e}")))?;
    write_text(path, &format!("{text}\n"))
}

/// Prints an aligned name/value table to stdout.
pub fn print_table(rows: &[(String, String)]) {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in rows {
        println!("{k:<width$}  {v}");
    }
}
