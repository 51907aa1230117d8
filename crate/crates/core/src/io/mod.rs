//! File formats: run records, score tables, rankings, curves, figures and
//! the line-oriented configuration format.
//!
//! All tables are comma-separated UTF-8 with a fixed header row and `.` as
//! the decimal separator. Errors name the offending line (1-based, header is
//! line 1).

use std::path::{Path, PathBuf};

use thiserror::Error;

mod config;
mod curve;
mod figure;
mod ranking;
mod runs;
mod scores;

pub use config::{parse_key_values, read_key_values, KeyValues};
pub use curve::{emit_curve, parse_curve, read_curve, write_curve, CURVE_HEADER};
pub use figure::{emit_figure, render_figure, FigureOptions};
pub use ranking::{parse_ranking, read_ranking, RANKING_HEADER};
pub use runs::{format_runs, parse_runs, read_runs, write_runs, RunRecord, RUNS_HEADER};
pub use scores::{format_scores, parse_scores, read_scores, write_scores, ScoreRound, SCORES_HEADER};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("line 1: header must be exactly `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: cannot parse {field} `{value}`")]
    Unparsable {
        line: u64,
        field: &'static str,
        value: String,
    },
    #[error("non-finite value at line {line}")]
    NonFinite { line: u64 },
    #[error("line {line}: duplicate {what}")]
    Duplicate { line: u64, what: String },
    #[error("line {line}: method `{method}` declared `{found}` but earlier rows say `{expected}`")]
    DirectionConflict {
        line: u64,
        method: String,
        expected: String,
        found: String,
    },
    #[error("round {round}: policy `{policy}` has no `{method}` score")]
    IncompleteRound {
        round: i64,
        policy: String,
        method: String,
    },
    #[error("round {round}: policies differ from round {first}")]
    RoundPolicyMismatch { round: i64, first: i64 },
    #[error("line {line}: {message}")]
    Invalid { line: u64, message: String },
    #[error("no rows")]
    NoRows,
    #[error("empty curve set")]
    NoCurves,
}

pub type Result<T> = std::result::Result<T, DataError>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reader over comma-separated text that checks the header and yields
/// `(line, fields)` for every data row.
pub(crate) fn csv_rows(
    text: &str,
    header: &str,
) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let found = reader
        .headers()
        .map_err(|e| DataError::Csv {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if found != header {
        return Err(DataError::Header {
            expected: header.to_string(),
            found,
        });
    }
    let expected = header.split(',').count();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != expected {
            return Err(DataError::FieldCount {
                line,
                expected,
                found: record.len(),
            });
        }
        rows.push((line, record));
    }
    Ok(rows)
}

pub(crate) fn parse_f64(line: u64, field: &'static str, raw: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| DataError::Unparsable {
        line,
        field,
        value: raw.to_string(),
    })?;
    if !v.is_finite() {
        return Err(DataError::NonFinite { line });
    }
    Ok(v)
}

pub(crate) fn parse_i64(line: u64, field: &'static str, raw: &str) -> Result<i64> {
    raw.trim().parse().map_err(|_| DataError::Unparsable {
        line,
        field,
        value: raw.to_string(),
    })
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, text).map_err(io_err(path))
}
