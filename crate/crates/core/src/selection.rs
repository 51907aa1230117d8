//! Offline policy selection strategies and the budget curves built from them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::estimator::{eop_plugin, EopCurve, EstimatorError, SelectionRound, ValueSample};
use crate::metrics::{MetricError, RankedList, ValueMap};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("score table is empty")]
    EmptyTable,
    #[error("unknown scoring method `{0}`")]
    UnknownMethod(String),
    #[error("no direction declared for method `{0}`")]
    MissingDirection(String),
    #[error("policy `{policy}` has no `{method}` score")]
    MissingScore { policy: String, method: String },
    #[error("non-finite `{method}` score for policy `{policy}`")]
    NonFinite { policy: String, method: String },
    #[error("degenerate value range")]
    DegenerateRange,
    #[error("score table policies do not match the value map")]
    CoverageMismatch,
    #[error("no score tables supplied")]
    NoTables,
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

pub type Result<T> = std::result::Result<T, SelectionError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::HigherIsBetter => "higher",
            Direction::LowerIsBetter => "lower",
        })
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "higher" => Ok(Direction::HigherIsBetter),
            "lower" => Ok(Direction::LowerIsBetter),
            other => Err(format!("direction must be `higher` or `lower`, got `{other}`")),
        }
    }
}

/// OPS scores of every policy under every scoring method, with the
/// direction each method is read in.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    scores: BTreeMap<String, BTreeMap<String, f64>>,
    directions: BTreeMap<String, Direction>,
}

impl ScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare_method(&mut self, method: impl Into<String>, direction: Direction) {
        self.directions.insert(method.into(), direction);
    }

    pub fn insert(
        &mut self,
        policy: impl Into<String>,
        method: impl Into<String>,
        score: f64,
    ) -> Result<()> {
        let (policy, method) = (policy.into(), method.into());
        if !score.is_finite() {
            return Err(SelectionError::NonFinite { policy, method });
        }
        if !self.directions.contains_key(&method) {
            return Err(SelectionError::MissingDirection(method));
        }
        self.scores.entry(policy).or_default().insert(method, score);
        Ok(())
    }

    pub fn direction(&self, method: &str) -> Option<Direction> {
        self.directions.get(method).copied()
    }

    pub fn methods(&self) -> impl Iterator<Item = (&str, Direction)> {
        self.directions.iter().map(|(m, &d)| (m.as_str(), d))
    }

    pub fn policies(&self) -> impl Iterator<Item = &str> {
        self.scores.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn score(&self, policy: &str, method: &str) -> Option<f64> {
        self.scores.get(policy)?.get(method).copied()
    }

    /// Checks that every policy has a score for every declared method.
    pub fn validate(&self) -> Result<()> {
        if self.scores.is_empty() {
            return Err(SelectionError::EmptyTable);
        }
        for (policy, row) in &self.scores {
            for method in self.directions.keys() {
                if !row.contains_key(method) {
                    return Err(SelectionError::MissingScore {
                        policy: policy.clone(),
                        method: method.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectionStrategy {
    /// Seeded uniformly random order.
    Uniform { seed: u64 },
    /// Order by one score column, best first per the column's direction.
    ByScore(String),
}

impl SelectionStrategy {
    pub fn name(&self) -> &str {
        match self {
            SelectionStrategy::Uniform { .. } => "uniform",
            SelectionStrategy::ByScore(method) => method,
        }
    }
}

/// Whether a uniform strategy may deploy the same policy twice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Replacement {
    With,
    Without,
}

fn uniform_order(ids: &[String], seed: u64) -> Vec<String> {
    let mut ids = ids.to_vec();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    ids
}

/// Ranks the policies of `table`. Score ties are broken by ascending policy
/// id so the order is total and reproducible.
pub fn rank_policies(table: &ScoreTable, strategy: &SelectionStrategy) -> Result<RankedList> {
    if table.is_empty() {
        return Err(SelectionError::EmptyTable);
    }
    let ids: Vec<String> = table.policies().map(str::to_string).collect();
    let ordered = match strategy {
        SelectionStrategy::Uniform { seed } => uniform_order(&ids, *seed),
        SelectionStrategy::ByScore(method) => {
            let direction = table.direction(method).ok_or_else(|| {
                if table.policies().any(|p| table.score(p, method).is_some()) {
                    SelectionError::MissingDirection(method.clone())
                } else {
                    SelectionError::UnknownMethod(method.clone())
                }
            })?;
            let mut scored = ids
                .into_iter()
                .map(|id| {
                    let s = table.score(&id, method).ok_or_else(|| SelectionError::MissingScore {
                        policy: id.clone(),
                        method: method.clone(),
                    })?;
                    Ok((id, s))
                })
                .collect::<Result<Vec<_>>>()?;
            scored.sort_by(|(ia, sa), (ib, sb)| {
                let by_score = match direction {
                    Direction::HigherIsBetter => sb.total_cmp(sa),
                    Direction::LowerIsBetter => sa.total_cmp(sb),
                };
                by_score.then_with(|| ia.cmp(ib))
            });
            scored.into_iter().map(|(id, _)| id).collect()
        }
    };
    Ok(RankedList::new(ordered)?)
}

/// Expected regret@b under uniform selection with replacement: the plug-in
/// curve of the min-max normalized values.
pub fn uniform_regret_eop(values: &ValueMap, max_budget: usize) -> Result<EopCurve> {
    let raw: Vec<f64> = values.iter().map(|(_, v)| v).collect();
    let sample = ValueSample::new(raw)?;
    let (worst, best) = (sample.min(), sample.max());
    if best == worst {
        return Err(SelectionError::DegenerateRange);
    }
    let normalized = sample.map(|v| (v - worst) / (best - worst))?;
    Ok(eop_plugin(&normalized, max_budget)?)
}

fn same_policies(table: &ScoreTable, values: &ValueMap) -> bool {
    table.len() == values.len() && table.policies().zip(values.ids()).all(|(a, b)| a == b)
}

/// Replays one selection round per score table and records the true values
/// of the selected policies in selection order, truncated at `max_budget`.
///
/// Round `r` of a uniform strategy uses a generator derived from the
/// strategy seed and `r`.
pub fn simulate_selection_rounds(
    tables: &[ScoreTable],
    values: &ValueMap,
    strategy: &SelectionStrategy,
    max_budget: usize,
    replacement: Replacement,
) -> Result<Vec<SelectionRound>> {
    if tables.is_empty() {
        return Err(SelectionError::NoTables);
    }
    if tables.iter().any(|t| !same_policies(t, values)) {
        return Err(SelectionError::CoverageMismatch);
    }
    tables
        .par_iter()
        .enumerate()
        .map(|(r, table)| match strategy {
            SelectionStrategy::Uniform { seed } => {
                let ids: Vec<String> = table.policies().map(str::to_string).collect();
                uniform_round(&ids, values, derive_seed(*seed, &[r as u64]), max_budget, replacement)
            }
            SelectionStrategy::ByScore(_) => {
                let ranking = rank_policies(table, strategy)?;
                let picked = ranking
                    .ids()
                    .iter()
                    .take(max_budget)
                    .map(|id| values.get(id))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                Ok(SelectionRound::new(picked)?)
            }
        })
        .collect()
}

/// `rounds` uniform selection rounds over `values` without score tables.
pub fn simulate_uniform_rounds(
    values: &ValueMap,
    rounds: usize,
    max_budget: usize,
    replacement: Replacement,
    seed: u64,
) -> Result<Vec<SelectionRound>> {
    let ids: Vec<String> = values.ids().map(str::to_string).collect();
    (0..rounds)
        .into_par_iter()
        .map(|r| uniform_round(&ids, values, derive_seed(seed, &[r as u64]), max_budget, replacement))
        .collect()
}

fn uniform_round(
    ids: &[String],
    values: &ValueMap,
    seed: u64,
    max_budget: usize,
    replacement: Replacement,
) -> Result<SelectionRound> {
    if ids.is_empty() {
        return Err(SelectionError::EmptyTable);
    }
    let picked: Vec<&String> = match replacement {
        Replacement::Without => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ids: Vec<&String> = ids.iter().collect();
            let take = max_budget.min(ids.len());
            let (head, _) = ids.partial_shuffle(&mut rng, take);
            head.to_vec()
        }
        Replacement::With => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..max_budget)
                .map(|_| &ids[rng.random_range(0..ids.len())])
                .collect()
        }
    };
    let picked = picked
        .into_iter()
        .map(|id| values.get(id))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(SelectionRound::new(picked)?)
}
