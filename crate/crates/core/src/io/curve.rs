use std::path::Path;

use crate::estimator::{EopCurve, EopPoint};

use super::{csv_rows, parse_f64, parse_i64, read_text, write_text, DataError, Result};

pub const CURVE_HEADER: &str = "budget,mean,std,n";

/// Curve as text, one row per budget. Floats use the shortest decimal that
/// parses back to the same value.
pub fn emit_curve(curve: &EopCurve) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    for p in &curve.points {
        out += &format!("{},{},{},{}\n", p.budget, p.mean, p.std, curve.n);
    }
    out
}

pub fn write_curve(path: &Path, curve: &EopCurve) -> Result<()> {
    write_text(path, &emit_curve(curve))
}

pub fn parse_curve(text: &str) -> Result<EopCurve> {
    let rows = csv_rows(text, CURVE_HEADER)?;
    if rows.is_empty() {
        return Err(DataError::NoRows);
    }
    let mut points = Vec::with_capacity(rows.len());
    let mut n = None;
    for (line, row) in rows {
        let budget = parse_i64(line, "budget", &row[0])?;
        if budget != points.len() as i64 + 1 {
            return Err(DataError::Invalid {
                line,
                message: format!("expected budget {}, found {budget}", points.len() + 1),
            });
        }
        let row_n = parse_i64(line, "n", &row[3])?;
        if *n.get_or_insert(row_n) != row_n || row_n < 1 {
            return Err(DataError::Invalid {
                line,
                message: format!("inconsistent sample size {row_n}"),
            });
        }
        points.push(EopPoint {
            budget: budget as usize,
            mean: parse_f64(line, "mean", &row[1])?,
            std: parse_f64(line, "std", &row[2])?,
        });
    }
    Ok(EopCurve {
        points,
        n: n.unwrap_or(0) as usize,
    })
}

pub fn read_curve(path: &Path) -> Result<EopCurve> {
    parse_curve(&read_text(path)?)
}
