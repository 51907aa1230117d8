//! Turning run records into per-algorithm samples and budget tables.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::estimator::{eop_plugin, eop_without_replacement, EstimatorError, ValueSample};
use crate::io::RunRecord;
use crate::metrics::{normalize_best_behavioral, MetricError};

/// Budgets shown by default in a budget table.
pub const DEFAULT_TABLE_BUDGETS: [usize; 7] = [1, 2, 3, 4, 8, 15, 30];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("no run records")]
    NoRuns,
    #[error("environment `{0}` has a degenerate value range; min-max normalization undefined")]
    DegenerateRange(String),
    #[error("environment `{0}` not present in the runs")]
    UnknownEnvironment(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

pub type Result<T> = std::result::Result<T, ReportError>;

/// How the seeds of one hyperparameter assignment collapse into one value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
    Min,
}

impl Aggregation {
    pub fn apply(self, values: &[f64]) -> f64 {
        match self {
            Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregation::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
            Aggregation::Median => {
                let mut v = values.to_vec();
                v.sort_by(f64::total_cmp);
                let mid = v.len() / 2;
                if v.len() % 2 == 1 {
                    v[mid]
                } else {
                    0.5 * (v[mid - 1] + v[mid])
                }
            }
        }
    }
}

impl FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "median" => Ok(Aggregation::Median),
            "min" => Ok(Aggregation::Min),
            other => Err(format!("aggregation must be mean, median or min, got `{other}`")),
        }
    }
}

/// Target metric applied to policy values before estimation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Metric {
    #[default]
    Raw,
    /// Relative to the best behavioral policy's value.
    BestBehavioral { v_best: f64, offset: f64 },
    /// Rescaled to [0, 1] across all policies of an environment.
    MinMax,
}

/// Seed-aggregated value of one trained policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValue {
    pub algorithm: String,
    pub environment: String,
    pub hyperparam_id: String,
    pub value: f64,
}

impl PolicyValue {
    pub fn policy_id(&self) -> String {
        format!("{}:{}", self.algorithm, self.hyperparam_id)
    }
}

/// One value per (algorithm, environment, hyperparameter assignment), in
/// order of first appearance.
pub fn aggregate_seeds(records: &[RunRecord], aggregation: Aggregation) -> Vec<PolicyValue> {
    let mut order: Vec<(String, String, String)> = Vec::new();
    let mut groups: HashMap<(String, String, String), Vec<f64>> = HashMap::new();
    for r in records {
        let key = (
            r.algorithm.clone(),
            r.environment.clone(),
            r.hyperparam_id.clone(),
        );
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r.value);
    }
    order
        .into_iter()
        .map(|key| {
            let value = aggregation.apply(&groups[&key]);
            let (algorithm, environment, hyperparam_id) = key;
            PolicyValue {
                algorithm,
                environment,
                hyperparam_id,
                value,
            }
        })
        .collect()
}

pub fn apply_metric(values: &mut [PolicyValue], metric: Metric) -> Result<()> {
    match metric {
        Metric::Raw => {}
        Metric::BestBehavioral { v_best, offset } => {
            for p in values.iter_mut() {
                p.value = normalize_best_behavioral(p.value, v_best, offset)?;
            }
        }
        Metric::MinMax => {
            let mut ranges: HashMap<String, (f64, f64)> = HashMap::new();
            for p in values.iter() {
                let r = ranges
                    .entry(p.environment.clone())
                    .or_insert((f64::INFINITY, f64::NEG_INFINITY));
                r.0 = r.0.min(p.value);
                r.1 = r.1.max(p.value);
            }
            if let Some((env, _)) = ranges.iter().find(|(_, (lo, hi))| lo == hi) {
                return Err(ReportError::DegenerateRange(env.clone()));
            }
            for p in values.iter_mut() {
                let (lo, hi) = ranges[&p.environment];
                p.value = (p.value - lo) / (hi - lo);
            }
        }
    }
    Ok(())
}

/// Per-algorithm samples of one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSample {
    pub algorithm: String,
    pub environment: String,
    pub sample: ValueSample,
}

/// Groups values by (environment, algorithm) in order of first appearance.
pub fn group_by_algorithm(values: &[PolicyValue]) -> Result<Vec<AlgorithmSample>> {
    if values.is_empty() {
        return Err(ReportError::NoRuns);
    }
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: HashMap<(String, String), Vec<f64>> = HashMap::new();
    for p in values {
        let key = (p.environment.clone(), p.algorithm.clone());
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(p.value);
    }
    order
        .into_iter()
        .map(|key| {
            let sample = ValueSample::new(groups.remove(&key).unwrap_or_default())?
                .with_label(key.1.clone());
            Ok(AlgorithmSample {
                environment: key.0,
                algorithm: key.1,
                sample,
            })
        })
        .collect()
}

/// How deployed policies are drawn when computing expected maxima.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// i.i.d. draws from the empirical distribution (plug-in estimator).
    #[default]
    WithReplacement,
    /// `b` distinct policies chosen uniformly.
    WithoutReplacement,
}

impl FromStr for Sampling {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "with-replacement" => Ok(Sampling::WithReplacement),
            "without-replacement" => Ok(Sampling::WithoutReplacement),
            other => Err(format!(
                "sampling must be with-replacement or without-replacement, got `{other}`"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetRow {
    pub environment: String,
    pub algorithm: String,
    /// Expected maximum per requested budget; `None` where the budget
    /// exceeds the number of policies.
    pub cells: Vec<Option<f64>>,
    pub final_value: f64,
    pub n: usize,
}

/// Expected maximum at fixed budgets for every algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetTable {
    pub budgets: Vec<usize>,
    pub rows: Vec<BudgetRow>,
}

pub fn budget_table(
    groups: &[AlgorithmSample],
    budgets: &[usize],
    sampling: Sampling,
) -> Result<BudgetTable> {
    let rows = groups
        .iter()
        .map(|g| {
            let n = g.sample.len();
            let reachable = budgets.iter().copied().filter(|&b| b <= n).max().unwrap_or(0);
            let curve = if reachable == 0 {
                None
            } else {
                Some(match sampling {
                    Sampling::WithReplacement => eop_plugin(&g.sample, reachable)?,
                    Sampling::WithoutReplacement => eop_without_replacement(&g.sample, reachable)?,
                })
            };
            let cells = budgets
                .iter()
                .map(|&b| {
                    curve
                        .as_ref()
                        .filter(|_| b <= n)
                        .and_then(|c| c.at(b))
                        .map(|p| p.mean)
                })
                .collect();
            Ok(BudgetRow {
                environment: g.environment.clone(),
                algorithm: g.algorithm.clone(),
                cells,
                final_value: g.sample.max(),
                n,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BudgetTable {
        budgets: budgets.to_vec(),
        rows,
    })
}

/// Whole number, half away from zero.
fn rounded(v: f64) -> String {
    let r = v.round();
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r:.0}")
    }
}

impl fmt::Display for BudgetTable {
    /// Space-separated rows: algorithm, one rounded cell per budget (`-`
    /// past N), the best value and N. A `# environment` line opens each
    /// environment block.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut current: Option<&str> = None;
        for row in &self.rows {
            if current != Some(row.environment.as_str()) {
                current = Some(&row.environment);
                writeln!(f, "# environment: {}", row.environment)?;
                write!(f, "algorithm")?;
                for b in &self.budgets {
                    write!(f, " B={b}")?;
                }
                writeln!(f, " final N")?;
            }
            write!(f, "{}", row.algorithm)?;
            for cell in &row.cells {
                match cell {
                    Some(v) => write!(f, " {}", rounded(*v))?,
                    None => write!(f, " -")?,
                }
            }
            writeln!(f, " {} {}", rounded(row.final_value), row.n)?;
        }
        Ok(())
    }
}
