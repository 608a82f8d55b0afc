//! Metrics logs: one JSON object per training iteration (JSON Lines).

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use litm_core::train::MetricsRow;
use tempfile::NamedTempFile;

use crate::atomic::{persist, temp_beside};
use crate::error::{FormatError, LitmError};

/// Streams rows to a temporary file next to `path`; `finish` moves it into
/// place, so an aborted run never leaves a partial log under the final name.
pub struct MetricsWriter {
    path: PathBuf,
    out: BufWriter<NamedTempFile>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self, LitmError> {
        Ok(Self { path: path.to_path_buf(), out: BufWriter::new(temp_beside(path)?) })
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<(), LitmError> {
        let line = serde_json::to_string(row).expect("metrics rows serialize");
        writeln!(self.out, "{line}").map_err(|e| LitmError::io(&self.path, e))
    }

    pub fn finish(self) -> Result<(), LitmError> {
        let tmp = self.out.into_inner().map_err(|e| LitmError::io(&self.path, e.into_error()))?;
        persist(tmp, &self.path)
    }
}

pub fn encode(rows: &[MetricsRow]) -> String {
    rows.iter().map(|r| serde_json::to_string(r).expect("metrics rows serialize") + "\n").collect()
}

pub fn parse(reader: impl BufRead) -> Result<Vec<MetricsRow>, FormatError> {
    let mut rows = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| FormatError::Malformed(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: MetricsRow =
            serde_json::from_str(&line).map_err(|e| FormatError::Malformed(format!("line {}: {e}", n + 1)))?;
        if let Some(prev) = rows.last() {
            let prev: &MetricsRow = prev;
            if row.iter != prev.iter + 1 || row.epoch < prev.epoch {
                return Err(FormatError::Inconsistent(format!("line {}: rows out of order", n + 1)));
            }
            if row.report.losses.len() != prev.report.losses.len() {
                return Err(FormatError::Inconsistent(format!("line {}: stage count changed", n + 1)));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn load(path: &Path) -> Result<Vec<MetricsRow>, LitmError> {
    let file = std::fs::File::open(path).map_err(|e| LitmError::io(path, e))?;
    parse(BufReader::new(file)).map_err(|e| LitmError::format(path, e))
}
