//! CSV tables and the run manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Decimal rendering with 12 significant digits, trailing zeros trimmed.
/// Magnitudes outside `[1e-6, 1e15)` use scientific notation.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-6..15).contains(&exp) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can carry into a new leading digit; the extra decimal is harmless
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        let io = |e: csv::Error| CliError::io(format!("{}: {e}", path.display()));
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::io(format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputEntry {
    pub experiment: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub seed: u64,
    pub path: PathBuf,
    pub rows: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub config_path: Option<PathBuf>,
    pub config_hash: String,
    pub seed_override: Option<u64>,
    pub threads: usize,
    pub started_at: String,
    pub finished_at: String,
    pub versions: Versions,
    pub warnings: Vec<String>,
    pub outputs: Vec<OutputEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Versions {
    pub supcoupling: &'static str,
    pub supcoupling_cli: &'static str,
}

impl Versions {
    pub fn current() -> Self {
        Self {
            supcoupling: supcoupling::VERSION,
            supcoupling_cli: env!("CARGO_PKG_VERSION"),
        }
    }
}
