use std::collections::HashSet;
use std::path::Path;

use super::{csv_rows, parse_f64, parse_i64, read_text, write_text, DataError, Result};

pub const RUNS_HEADER: &str = "algorithm,environment,hyperparam_id,seed,value";

/// One online evaluation: the return of the policy trained by `algorithm`
/// with hyperparameters `hyperparam_id` and training seed `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algorithm: String,
    pub environment: String,
    pub hyperparam_id: String,
    pub seed: i64,
    pub value: f64,
}

impl RunRecord {
    pub fn policy_id(&self) -> String {
        format!("{}:{}", self.algorithm, self.hyperparam_id)
    }
}

pub fn parse_runs(text: &str) -> Result<Vec<RunRecord>> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (line, row) in csv_rows(text, RUNS_HEADER)? {
        let record = RunRecord {
            algorithm: row[0].to_string(),
            environment: row[1].to_string(),
            hyperparam_id: row[2].to_string(),
            seed: parse_i64(line, "seed", &row[3])?,
            value: parse_f64(line, "value", &row[4])?,
        };
        let key = (
            record.algorithm.clone(),
            record.environment.clone(),
            record.hyperparam_id.clone(),
            record.seed,
        );
        if !seen.insert(key) {
            return Err(DataError::Duplicate {
                line,
                what: format!(
                    "run ({}, {}, {}, {})",
                    record.algorithm, record.environment, record.hyperparam_id, record.seed
                ),
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn read_runs(path: &Path) -> Result<Vec<RunRecord>> {
    parse_runs(&read_text(path)?)
}

pub fn format_runs(records: &[RunRecord]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(RUNS_HEADER.split(',')).expect("in-memory write");
    for r in records {
        w.write_record([
            r.algorithm.as_str(),
            r.environment.as_str(),
            r.hyperparam_id.as_str(),
            &r.seed.to_string(),
            &r.value.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn write_runs(path: &Path, records: &[RunRecord]) -> Result<()> {
    write_text(path, &format_runs(records))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed() {
        let text = "algorithm,environment,hyperparam_id,seed,value\n\
                    BC,Hopper,h0,0,1.5\nBC,Hopper,h1,0,2\nCQL,Hopper,h0,0,-3e2\n";
        let runs = parse_runs(text).unwrap();
        assert_eq!(runs.len(), 3);
        assert_eq!(runs[2].value, -300.0);
        assert_eq!(runs[0].policy_id(), "BC:h0");
    }

    #[test]
    fn duplicate_names_line() {
        let text = "algorithm,environment,hyperparam_id,seed,value\n\
                    BC,Hopper,h0,0,1.5\nBC,Hopper,h0,0,2\n";
        let err = parse_runs(text).unwrap_err();
        assert!(matches!(err, DataError::Duplicate { line: 3, .. }), "{err}");
        assert!(err.to_string().starts_with("line 3"));
    }

    #[test]
    fn nan_rejected() {
        let text = "algorithm,environment,hyperparam_id,seed,value\nBC,Hopper,h0,0,1\nBC,Hopper,h1,0,NaN\n";
        assert_eq!(
            parse_runs(text).unwrap_err().to_string(),
            "non-finite value at line 3"
        );
    }

    #[test]
    fn header_and_field_errors() {
        let err = parse_runs("algorithm,environment,seed,value\nBC,H,0,1\n").unwrap_err();
        assert!(matches!(err, DataError::Header { .. }));
        let err = parse_runs(&format!("{RUNS_HEADER}\nBC,H,h0,0\n")).unwrap_err();
        assert!(matches!(err, DataError::FieldCount { line: 2, .. }), "{err}");
        let err = parse_runs(&format!("{RUNS_HEADER}\nBC,H,h0,zero,1\n")).unwrap_err();
        assert_eq!(err.to_string(), "line 2: cannot parse seed `zero`");
        let err = parse_runs(&format!("{RUNS_HEADER}\nBC,H,h0,0,1,5\n")).unwrap_err();
        assert!(matches!(err, DataError::FieldCount { line: 2, .. }));
    }

    #[test]
    fn round_trip_quotes_commas() {
        let records = vec![RunRecord {
            algorithm: "CQL".into(),
            environment: "Hopper-v3".into(),
            hyperparam_id: "{alpha: 5, tau: 2}".into(),
            seed: 2,
            value: 0.1 + 0.2,
        }];
        assert_eq!(parse_runs(&format_runs(&records)).unwrap(), records);
    }
}
