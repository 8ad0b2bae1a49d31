//! CSV tables, metadata sidecars and completion checks.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;

/// Numeric CSV cell: 17 significant digits in scientific notation.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

/// A numeric table with named columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let records = self
            .rows
            .iter()
            .map(|r| r.iter().map(|&v| format_number(v)).collect());
        csv_bytes(&self.columns, records)
    }

    /// Reads a table whose cells all parse as numbers.
    pub fn read(path: &Path) -> Result<Table, CliError> {
        let mut reader = csv::Reader::from_path(path)?;
        let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut table = Table::new(columns);
        for record in reader.records() {
            let record = record?;
            let row = record
                .iter()
                .map(|c| {
                    c.trim().parse::<f64>().map_err(|_| {
                        CliError::Render(format!("{}: non-numeric cell `{c}`", path.display()))
                    })
                })
                .collect::<Result<Vec<f64>, CliError>>()?;
            table.push(row);
        }
        Ok(table)
    }
}

/// Serializes a header and string records with LF line endings.
pub fn csv_bytes(header: &[String], records: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for r in records {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

/// Writes through a temporary file so an interrupted run never leaves a
/// truncated artifact behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// A cell that could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub location: String,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Partial,
    Failed,
}

/// Metadata written next to the tables of a study. It is written last and
/// marks the study as finished.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub study: String,
    pub version: String,
    pub config: serde_json::Value,
    pub files: Vec<String>,
    pub cells: usize,
    pub status: RunStatus,
    pub failures: Vec<FailureRecord>,
    /// Study-specific summary values.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub summary: serde_json::Value,
}

impl Sidecar {
    pub fn path(dir: &Path, study: &str) -> PathBuf {
        dir.join(format!("{}.json", study.replace('-', "_")))
    }

    pub fn read(path: &Path) -> Option<Sidecar> {
        let text = fs::read_to_string(path).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(path, &bytes)
    }

    /// Whether this record describes a finished run of `config` whose
    /// files are all present in `dir`.
    pub fn completes(&self, dir: &Path, config: &serde_json::Value) -> bool {
        self.status == RunStatus::Complete
            && &self.config == config
            && self.version == env!("CARGO_PKG_VERSION")
            && self.files.iter().all(|f| dir.join(f).is_file())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_have_seventeen_digits() {
        assert_eq!(format_number(1.0), "1.0000000000000000e0");
        assert_eq!(format_number(-2.5e-5), "-2.5000000000000001e-5");
        assert_eq!(format_number(f64::NAN), "NaN");
        let x = 0.1 + 0.2;
        assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_round_trip_uses_lf() {
        let mut t = Table::new(vec!["a".into(), "b".into()]);
        t.push(vec![1.0, f64::NAN]);
        t.push(vec![-3.25, 1e-300]);
        let bytes = t.to_csv().unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(!text.contains('\r'));
        assert!(text.starts_with("a,b\n"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_atomic(&p, &bytes).unwrap();
        let back = Table::read(&p).unwrap();
        assert_eq!(back.columns, t.columns);
        assert_eq!(back.rows[1], t.rows[1]);
        assert!(back.rows[0][1].is_nan());
    }
}
