//! Target-metric transforms and ranking diagnostics.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("non-positive reference value; supply offset")]
    NonPositiveReference,
    #[error("ranking is empty")]
    EmptyRanking,
    #[error("duplicate policy id `{0}` in ranking")]
    DuplicateId(String),
    #[error("tie-free formula only")]
    Ties,
    #[error("k = {k} out of range 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("policy `{0}` has no value")]
    MissingValue(String),
    #[error("non-finite value for policy `{0}`")]
    NonFinite(String),
    #[error("rankings cover different policy sets")]
    MismatchedIds,
    #[error("spearman needs at least two policies")]
    TooShort,
}

pub type Result<T> = std::result::Result<T, MetricError>;

/// Policies in order of preference; position 0 is rank 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList {
    ids: Vec<String>,
}

impl RankedList {
    pub fn new<S: Into<String>>(ids: impl IntoIterator<Item = S>) -> Result<Self> {
        let ids: Vec<String> = ids.into_iter().map(Into::into).collect();
        if ids.is_empty() {
            return Err(MetricError::EmptyRanking);
        }
        let mut seen = BTreeSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(MetricError::DuplicateId(id.clone()));
            }
        }
        Ok(Self { ids })
    }

    /// Builds a ranking from explicit `(id, rank)` pairs. Equal ranks are
    /// rejected because only the tie-free Spearman formula is supported.
    pub fn from_ranks<S: Into<String>>(pairs: impl IntoIterator<Item = (S, i64)>) -> Result<Self> {
        let mut pairs: Vec<(String, i64)> = pairs.into_iter().map(|(s, r)| (s.into(), r)).collect();
        pairs.sort_by_key(|p| p.1);
        if pairs.windows(2).any(|w| w[0].1 == w[1].1) {
            return Err(MetricError::Ties);
        }
        Self::new(pairs.into_iter().map(|(id, _)| id))
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// 1-based rank of every id.
    pub fn ranks(&self) -> BTreeMap<&str, usize> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i + 1))
            .collect()
    }
}

/// True online value per policy id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValueMap {
    values: BTreeMap<String, f64>,
}

impl ValueMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, value: f64) -> Result<()> {
        let id = id.into();
        if !value.is_finite() {
            return Err(MetricError::NonFinite(id));
        }
        self.values.insert(id, value);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<f64> {
        self.values
            .get(id)
            .copied()
            .ok_or_else(|| MetricError::MissingValue(id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for ValueMap {
    /// Panics on non-finite values; use [`ValueMap::insert`] for untrusted input.
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        let mut map = ValueMap::new();
        for (k, v) in iter {
            map.insert(k, v).expect("finite value");
        }
        map
    }
}

/// `(v - v_best) / (v_best + offset)`: performance relative to the best
/// behavioral policy. `offset` lifts environments with non-positive returns
/// above zero and must be supplied explicitly.
pub fn normalize_best_behavioral(v: f64, v_best: f64, offset: f64) -> Result<f64> {
    let reference = v_best + offset;
    if reference <= 0.0 || !reference.is_finite() {
        return Err(MetricError::NonPositiveReference);
    }
    Ok(((v + offset) - reference) / reference)
}

fn value_range(ranking: &RankedList, values: &ValueMap) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for id in ranking.ids() {
        let v = values.get(id)?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

/// `(V(best of top k) - V(worst)) / (V(best) - V(worst))`, where best and
/// worst range over every policy in the ranking. 1 means the top `k`
/// contains the truly best policy.
///
/// When every policy has the same value the ratio is undefined and 1.0 is
/// returned.
pub fn inverse_normalized_regret_at_k(
    ranking: &RankedList,
    values: &ValueMap,
    k: usize,
) -> Result<f64> {
    let n = ranking.len();
    if k == 0 || k > n {
        return Err(MetricError::KOutOfRange { k, n });
    }
    let (worst, best) = value_range(ranking, values)?;
    if best == worst {
        log::warn!("all {n} policies share value {best}; regret@{k} reported as 1.0");
        return Ok(1.0);
    }
    let mut top = f64::NEG_INFINITY;
    for id in &ranking.ids()[..k] {
        top = top.max(values.get(id)?);
    }
    Ok((top - worst) / (best - worst))
}

/// Regret@k for every `k` in `1..=N`.
pub fn regret_curve(ranking: &RankedList, values: &ValueMap) -> Result<Vec<f64>> {
    let (worst, best) = value_range(ranking, values)?;
    if best == worst {
        log::warn!("all policies share value {best}; regret curve reported as all ones");
        return Ok(vec![1.0; ranking.len()]);
    }
    let span = best - worst;
    let mut top = f64::NEG_INFINITY;
    ranking
        .ids()
        .iter()
        .map(|id| {
            top = top.max(values.get(id)?);
            Ok((top - worst) / span)
        })
        .collect()
}

/// Spearman's rank correlation via `1 - 6 Σd² / (n(n² - 1))`.
pub fn spearman_rho(a: &RankedList, b: &RankedList) -> Result<f64> {
    let n = a.len();
    if n != b.len() {
        return Err(MetricError::MismatchedIds);
    }
    if n < 2 {
        return Err(MetricError::TooShort);
    }
    let rb = b.ranks();
    let mut d2: u128 = 0;
    for (id, ra) in a.ranks() {
        let rb = *rb.get(id).ok_or(MetricError::MismatchedIds)?;
        let d = ra.abs_diff(rb) as u128;
        d2 += d * d;
    }
    let n = n as f64;
    Ok(1.0 - 6.0 * d2 as f64 / (n * (n * n - 1.0)))
}
