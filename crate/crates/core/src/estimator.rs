//! Expected maximum performance under an online evaluation budget.
//!
//! Given the online values of `N` trained policies, the quantity of interest
//! for a budget `b` is the expectation of the largest of `b` deployed values.
//! Two families of estimators live here:
//!
//! * [`eop_plugin`] substitutes the empirical CDF of the observed values into
//!   the distribution of the maximum of `b` i.i.d. draws (selection with
//!   replacement). [`eop_without_replacement`] is the exact counterpart for
//!   `b` distinct policies drawn uniformly.
//! * [`eop_vanilla_average`] averages running maxima over recorded selection
//!   rounds and makes no independence assumption about how policies were
//!   picked.
//!
//! [`expected_max_bruteforce`] and [`expected_max_montecarlo`] are oracles
//! used to check the closed forms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::rng::derive_seed;

/// Default cap on the number of tuples [`expected_max_bruteforce`] will visit.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Minimum number of trials accepted by [`expected_max_montecarlo`].
pub const MIN_MONTECARLO_TRIALS: u64 = 100;

const MONTECARLO_CHUNK: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("empty sample")]
    EmptySample,
    #[error("non-finite input")]
    NonFinite,
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("enumeration too large: {tuples} tuples exceeds cap {cap}")]
    EnumerationTooLarge { tuples: u128, cap: u128 },
    #[error("monte carlo needs at least {MIN_MONTECARLO_TRIALS} trials, got {0}")]
    TooFewTrials(u64),
    #[error("no selection rounds")]
    NoRounds,
    #[error("empty selection round")]
    EmptyRound,
    #[error("budget {budget} exceeds sample size {n} for selection without replacement")]
    BudgetExceedsSample { budget: usize, n: usize },
}

pub type Result<T> = std::result::Result<T, EstimatorError>;

fn check_finite(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(EstimatorError::EmptySample);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(EstimatorError::NonFinite);
    }
    Ok(())
}

/// Online returns of the `N` policies produced by one hyperparameter search,
/// kept in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSample {
    values: Vec<f64>,
    label: String,
}

impl ValueSample {
    pub fn new(values: impl Into<Vec<f64>>) -> Result<Self> {
        let mut values = values.into();
        check_finite(&values)?;
        values.sort_by(f64::total_cmp);
        Ok(Self {
            values,
            label: String::new(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Values in ascending order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; a sample cannot be constructed empty.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Distinct values with the cumulative count of observations `<=` each.
    fn support(&self) -> Vec<(f64, usize)> {
        let mut support: Vec<(f64, usize)> = Vec::new();
        for (i, &v) in self.values.iter().enumerate() {
            match support.last_mut() {
                Some(last) if last.0 == v => last.1 = i + 1,
                _ => support.push((v, i + 1)),
            }
        }
        support
    }

    /// Apply a map to every value, keeping the label. The map must preserve
    /// finiteness.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Ok(Self::new(self.values.iter().map(|&v| f(v)).collect::<Vec<_>>())?
            .with_label(self.label.clone()))
    }
}

/// Expected maximum and its spread for one budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EopPoint {
    pub budget: usize,
    pub mean: f64,
    pub std: f64,
}

/// Expected maximum performance for budgets `1..=points.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct EopCurve {
    pub points: Vec<EopPoint>,
    /// Size of the sample the curve was estimated from.
    pub n: usize,
}

impl EopCurve {
    pub fn max_budget(&self) -> usize {
        self.points.len()
    }

    /// Point for budget `b` (1-based), if the curve reaches it.
    pub fn at(&self, budget: usize) -> Option<&EopPoint> {
        budget.checked_sub(1).and_then(|i| self.points.get(i))
    }

    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean).collect()
    }
}

/// Mean and standard deviation of a discrete distribution given as
/// `(value, probability)` pairs, summed in ascending value order.
fn weighted_moments(atoms: impl Iterator<Item = (f64, f64)> + Clone) -> (f64, f64) {
    let mean: f64 = atoms.clone().map(|(v, w)| v * w).sum();
    let var: f64 = atoms.map(|(v, w)| w * (v - mean) * (v - mean)).sum();
    (mean, var.max(0.0).sqrt())
}

fn cdf_power(f: f64, budget: usize) -> f64 {
    if f <= 0.0 {
        0.0
    } else if f >= 1.0 {
        1.0
    } else {
        f.powi(budget.min(i32::MAX as usize) as i32)
    }
}

/// Plug-in estimate of the expected maximum of `b` values drawn i.i.d. from
/// the empirical distribution of `sample`, for every `b` in `1..=max_budget`.
///
/// Tied values form a single support point whose ECDF jump covers all
/// duplicates. The reported `std` is the standard deviation of the maximum
/// under the same empirical distribution. `max_budget` may exceed the sample
/// size.
pub fn eop_plugin(sample: &ValueSample, max_budget: usize) -> Result<EopCurve> {
    if max_budget == 0 {
        return Err(EstimatorError::ZeroBudget);
    }
    let n = sample.len() as f64;
    let support = sample.support();
    let points = (1..=max_budget)
        .map(|budget| {
            let mut prev = 0.0;
            let atoms: Vec<(f64, f64)> = support
                .iter()
                .map(|&(v, count)| {
                    let cur = cdf_power(count as f64 / n, budget);
                    let w = cur - prev;
                    prev = cur;
                    (v, w)
                })
                .collect();
            let (mean, std) = weighted_moments(atoms.iter().copied());
            EopPoint { budget, mean, std }
        })
        .collect();
    Ok(EopCurve {
        points,
        n: sample.len(),
    })
}

/// Exact expected maximum of `b` distinct policies chosen uniformly at random
/// (selection without replacement), for every `b` in `1..=max_budget`.
///
/// `P(max <= v_(i)) = C(i, b) / C(N, b)`, evaluated in log space so large `N`
/// does not underflow.
pub fn eop_without_replacement(sample: &ValueSample, max_budget: usize) -> Result<EopCurve> {
    if max_budget == 0 {
        return Err(EstimatorError::ZeroBudget);
    }
    let n = sample.len();
    if max_budget > n {
        return Err(EstimatorError::BudgetExceedsSample {
            budget: max_budget,
            n,
        });
    }
    let support = sample.support();
    let points = (1..=max_budget)
        .map(|budget| {
            let cdf = subset_max_cdf(n, budget);
            let mut prev = 0.0;
            let atoms: Vec<(f64, f64)> = support
                .iter()
                .map(|&(v, count)| {
                    let cur = cdf[count];
                    let w = cur - prev;
                    prev = cur;
                    (v, w)
                })
                .collect();
            let (mean, std) = weighted_moments(atoms.iter().copied());
            EopPoint { budget, mean, std }
        })
        .collect();
    Ok(EopCurve { points, n })
}

/// `cdf[i] = C(i, b) / C(n, b)` for `i` in `0..=n`.
fn subset_max_cdf(n: usize, b: usize) -> Vec<f64> {
    let mut cdf = vec![0.0; n + 1];
    // ln C(b, b) / C(n, b) = sum_j ln((b - j) / (n - j))
    let mut log_g: f64 = (0..b)
        .map(|j| ((b - j) as f64).ln() - ((n - j) as f64).ln())
        .sum();
    cdf[b] = log_g.exp();
    for i in b + 1..=n {
        log_g += (i as f64).ln() - ((i - b) as f64).ln();
        cdf[i] = log_g.exp();
    }
    cdf[n] = 1.0;
    cdf
}

/// Exact mean and standard deviation of the maximum of `b` values drawn with
/// replacement, by enumerating all `N^b` ordered tuples.
pub fn expected_max_bruteforce(sample: &ValueSample, budget: usize) -> Result<(f64, f64)> {
    expected_max_bruteforce_capped(sample, budget, DEFAULT_ENUMERATION_CAP)
}

pub fn expected_max_bruteforce_capped(
    sample: &ValueSample,
    budget: usize,
    cap: u128,
) -> Result<(f64, f64)> {
    if budget == 0 {
        return Err(EstimatorError::ZeroBudget);
    }
    let n = sample.len();
    let tuples = (n as u128)
        .checked_pow(budget.min(u32::MAX as usize) as u32)
        .unwrap_or(u128::MAX);
    if tuples > cap {
        return Err(EstimatorError::EnumerationTooLarge { tuples, cap });
    }
    let values = sample.values();
    let maxima = || {
        let mut idx = vec![0usize; budget];
        let mut done = false;
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            let m = idx.iter().map(|&i| values[i]).fold(f64::NEG_INFINITY, f64::max);
            // Odometer increment, last position fastest.
            done = true;
            for slot in idx.iter_mut().rev() {
                *slot += 1;
                if *slot < n {
                    done = false;
                    break;
                }
                *slot = 0;
            }
            Some(m)
        })
    };
    let count = tuples as f64;
    let mean = maxima().sum::<f64>() / count;
    let var = maxima().map(|m| (m - mean) * (m - mean)).sum::<f64>() / count;
    Ok((mean, var.max(0.0).sqrt()))
}

/// Monte Carlo estimate of the expected maximum of `b` values drawn uniformly
/// with replacement. Returns `(mean, standard_error)`.
///
/// Trials are split into fixed-size chunks, each with its own generator
/// derived from `seed` and the chunk index, so the result does not depend on
/// how many worker threads run them.
pub fn expected_max_montecarlo(
    sample: &ValueSample,
    budget: usize,
    trials: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if budget == 0 {
        return Err(EstimatorError::ZeroBudget);
    }
    if trials < MIN_MONTECARLO_TRIALS {
        return Err(EstimatorError::TooFewTrials(trials));
    }
    let values = sample.values();
    let n = values.len();
    let chunks = trials.div_ceil(MONTECARLO_CHUNK);
    let partials: Vec<Welford> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[chunk]));
            let len = MONTECARLO_CHUNK.min(trials - chunk * MONTECARLO_CHUNK);
            let mut acc = Welford::default();
            for _ in 0..len {
                let mut top = 0usize;
                for _ in 0..budget {
                    top = top.max(rng.random_range(0..n));
                }
                // values are sorted, so the largest index is the largest value
                acc.push(values[top]);
            }
            acc
        })
        .collect();
    let total = partials
        .into_iter()
        .fold(Welford::default(), |acc, part| acc.merge(&part));
    let std = total.sample_std();
    Ok((total.mean, std / (trials as f64).sqrt()))
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&self, other: &Welford) -> Welford {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2
            + other.m2
            + delta * delta * (self.count as f64 * other.count as f64) / count as f64;
        Welford { count, mean, m2 }
    }

    fn sample_std(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0).sqrt()
        }
    }
}

/// True online values of the policies one selection round deployed, in the
/// order they were selected.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRound {
    ordered_values: Vec<f64>,
}

impl SelectionRound {
    pub fn new(ordered_values: impl Into<Vec<f64>>) -> Result<Self> {
        let ordered_values = ordered_values.into();
        if ordered_values.is_empty() {
            return Err(EstimatorError::EmptyRound);
        }
        if ordered_values.iter().any(|v| !v.is_finite()) {
            return Err(EstimatorError::NonFinite);
        }
        Ok(Self { ordered_values })
    }

    pub fn values(&self) -> &[f64] {
        &self.ordered_values
    }

    pub fn len(&self) -> usize {
        self.ordered_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordered_values.is_empty()
    }

    /// Running maximum over the selection order.
    pub fn running_max(&self) -> Vec<f64> {
        self.ordered_values
            .iter()
            .scan(f64::NEG_INFINITY, |best, &v| {
                *best = best.max(v);
                Some(*best)
            })
            .collect()
    }
}

/// Averages the running maximum at each position over all rounds.
///
/// Budgets past the shortest round are omitted. `std` is the across-round
/// sample standard deviation of the running maximum (0 for a single round).
pub fn eop_vanilla_average(rounds: &[SelectionRound], max_budget: usize) -> Result<EopCurve> {
    if rounds.is_empty() {
        return Err(EstimatorError::NoRounds);
    }
    if max_budget == 0 {
        return Err(EstimatorError::ZeroBudget);
    }
    let shortest = rounds.iter().map(SelectionRound::len).min().unwrap_or(0);
    if shortest == 0 {
        return Err(EstimatorError::EmptyRound);
    }
    let maxima: Vec<Vec<f64>> = rounds.iter().map(SelectionRound::running_max).collect();
    let points = (1..=max_budget.min(shortest))
        .map(|budget| {
            let mut acc = Welford::default();
            for round in &maxima {
                acc.push(round[budget - 1]);
            }
            EopPoint {
                budget,
                mean: acc.mean,
                std: acc.sample_std(),
            }
        })
        .collect();
    Ok(EopCurve {
        points,
        n: shortest,
    })
}
