//! Adapter from externally released evaluation tables to the canonical runs
//! schema. Only this module knows about foreign column names.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use eop_core::io::RunRecord;

#[derive(Debug, Args)]
pub struct ImportArgs {
    /// Comma-separated result tables with a header row.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Canonical runs file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Environment name for every row; overrides --environment-column.
    #[arg(long)]
    pub environment: Option<String>,
    #[arg(long, default_value = "environment")]
    pub environment_column: String,
    /// Algorithm name for every row; overrides --algorithm-column.
    #[arg(long)]
    pub algorithm: Option<String>,
    #[arg(long, default_value = "algorithm")]
    pub algorithm_column: String,
    #[arg(long, default_value = "hyperparam")]
    pub hyperparam_column: String,
    /// Seed column; rows are given seed 0 when absent from the table.
    #[arg(long, default_value = "seed")]
    pub seed_column: String,
    #[arg(long, default_value = "return")]
    pub value_column: String,
}

struct Columns {
    environment: Option<usize>,
    algorithm: Option<usize>,
    hyperparam: usize,
    seed: Option<usize>,
    value: usize,
}

fn locate(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn columns(path: &Path, headers: &csv::StringRecord, args: &ImportArgs) -> Result<Columns> {
    let required = |name: &str| {
        locate(headers, name).with_context(|| format!("{}: line 1: missing column `{name}`", path.display()))
    };
    Ok(Columns {
        environment: match args.environment {
            Some(_) => None,
            None => Some(required(&args.environment_column)?),
        },
        algorithm: match args.algorithm {
            Some(_) => None,
            None => Some(required(&args.algorithm_column)?),
        },
        hyperparam: required(&args.hyperparam_column)?,
        seed: locate(headers, &args.seed_column),
        value: required(&args.value_column)?,
    })
}

pub fn import(args: &ImportArgs) -> Result<Vec<RunRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for path in &args.inputs {
        let mut reader = csv::ReaderBuilder::new()
            .from_path(path)
            .with_context(|| format!("{}: cannot open", path.display()))?;
        let headers = reader.headers()?.clone();
        let cols = columns(path, &headers, args)?;
        for (i, row) in reader.records().enumerate() {
            let line = i + 2;
            let row = row.with_context(|| format!("{}: line {line}: malformed row", path.display()))?;
            let field = |idx: usize| row.get(idx).unwrap_or("").trim().to_string();
            let at = |what: &str, raw: &str| format!("{}: line {line}: cannot parse {what} `{raw}`", path.display());
            let value_raw = field(cols.value);
            let value: f64 = value_raw.parse().with_context(|| at("value", &value_raw))?;
            if !value.is_finite() {
                bail!("{}: non-finite value at line {line}", path.display());
            }
            let seed = match cols.seed {
                Some(idx) => {
                    let raw = field(idx);
                    raw.parse::<i64>().with_context(|| at("seed", &raw))?
                }
                None => 0,
            };
            let record = RunRecord {
                algorithm: args.algorithm.clone().unwrap_or_else(|| field(cols.algorithm.unwrap_or(0))),
                environment: args.environment.clone().unwrap_or_else(|| field(cols.environment.unwrap_or(0))),
                hyperparam_id: field(cols.hyperparam),
                seed,
                value,
            };
            let key = (
                record.algorithm.clone(),
                record.environment.clone(),
                record.hyperparam_id.clone(),
                record.seed,
            );
            if !seen.insert(key) {
                bail!("{}: line {line}: duplicate run", path.display());
            }
            records.push(record);
        }
    }
    if records.is_empty() {
        bail!("no rows");
    }
    Ok(records)
}
