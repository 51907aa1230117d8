use std::path::Path;

use crate::metrics::RankedList;

use super::{csv_rows, parse_i64, read_text, DataError, Result};

pub const RANKING_HEADER: &str = "policy_id,rank";

/// Parses a ranking file; rows may appear in any order, rank 1 is best.
pub fn parse_ranking(text: &str) -> Result<RankedList> {
    let rows = csv_rows(text, RANKING_HEADER)?;
    if rows.is_empty() {
        return Err(DataError::NoRows);
    }
    let last_line = rows.last().map_or(1, |r| r.0);
    let pairs = rows
        .into_iter()
        .map(|(line, row)| Ok((row[0].to_string(), parse_i64(line, "rank", &row[1])?)))
        .collect::<Result<Vec<_>>>()?;
    RankedList::from_ranks(pairs).map_err(|e| DataError::Invalid {
        line: last_line,
        message: e.to_string(),
    })
}

pub fn read_ranking(path: &Path) -> Result<RankedList> {
    parse_ranking(&read_text(path)?)
}
