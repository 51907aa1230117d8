use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use crate::selection::{Direction, ScoreTable};

use super::{csv_rows, parse_f64, parse_i64, read_text, write_text, DataError, Result};

pub const SCORES_HEADER: &str = "round,policy_id,method,score,direction";

/// The score table of one selection round.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRound {
    pub round: i64,
    pub table: ScoreTable,
}

/// Parses a score file into one table per round, ordered by round number.
/// Each method's direction must agree across all rows, and every round must
/// score the same policies under every method.
pub fn parse_scores(text: &str) -> Result<Vec<ScoreRound>> {
    let rows = csv_rows(text, SCORES_HEADER)?;
    if rows.is_empty() {
        return Err(DataError::NoRows);
    }
    let mut directions: BTreeMap<String, (Direction, String)> = BTreeMap::new();
    let mut cells: BTreeMap<i64, BTreeMap<(String, String), f64>> = BTreeMap::new();
    let mut seen = HashSet::new();
    for (line, row) in rows {
        let round = parse_i64(line, "round", &row[0])?;
        let policy = row[1].to_string();
        let method = row[2].to_string();
        let score = parse_f64(line, "score", &row[3])?;
        let raw_direction = row[4].trim().to_string();
        let direction: Direction = raw_direction
            .parse()
            .map_err(|message| DataError::Invalid { line, message })?;
        match directions.get(&method) {
            Some((d, first)) if *d != direction => {
                return Err(DataError::DirectionConflict {
                    line,
                    method,
                    expected: first.clone(),
                    found: raw_direction,
                })
            }
            Some(_) => {}
            None => {
                directions.insert(method.clone(), (direction, raw_direction));
            }
        }
        if !seen.insert((round, policy.clone(), method.clone())) {
            return Err(DataError::Duplicate {
                line,
                what: format!("score (round {round}, {policy}, {method})"),
            });
        }
        cells.entry(round).or_default().insert((policy, method), score);
    }

    let mut out = Vec::with_capacity(cells.len());
    let mut first_policies: Option<(i64, Vec<String>)> = None;
    for (round, cells) in cells {
        let mut table = ScoreTable::new();
        for (method, (direction, _)) in &directions {
            table.declare_method(method.clone(), *direction);
        }
        for ((policy, method), score) in &cells {
            table
                .insert(policy.clone(), method.clone(), *score)
                .expect("validated cell");
        }
        if let Err(crate::selection::SelectionError::MissingScore { policy, method }) =
            table.validate()
        {
            return Err(DataError::IncompleteRound {
                round,
                policy,
                method,
            });
        }
        let policies: Vec<String> = table.policies().map(str::to_string).collect();
        match &first_policies {
            Some((first, expected)) if *expected != policies => {
                return Err(DataError::RoundPolicyMismatch {
                    round,
                    first: *first,
                })
            }
            Some(_) => {}
            None => first_policies = Some((round, policies)),
        }
        out.push(ScoreRound { round, table });
    }
    Ok(out)
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRound>> {
    parse_scores(&read_text(path)?)
}

pub fn format_scores(rounds: &[ScoreRound]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(SCORES_HEADER.split(',')).expect("in-memory write");
    for ScoreRound { round, table } in rounds {
        for policy in table.policies() {
            for (method, direction) in table.methods() {
                let score = table.score(policy, method).expect("complete table");
                w.write_record([
                    round.to_string().as_str(),
                    policy,
                    method,
                    &score.to_string(),
                    &direction.to_string(),
                ])
                .expect("in-memory write");
            }
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn write_scores(path: &Path, rounds: &[ScoreRound]) -> Result<()> {
    write_text(path, &format_scores(rounds))
}
