//! Hyperparameter grids and the two offline learners.

use std::collections::BTreeMap;

use rand::Rng;

use crate::dataset::Dataset;
use crate::mdp::QTable;
use crate::policy::TabularPolicy;
use crate::{Result, TestbedError};

/// Candidate values for each named hyperparameter of one algorithm.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HyperparamGrid {
    params: BTreeMap<String, Vec<f64>>,
}

impl HyperparamGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(TestbedError::Hyperparam {
                name,
                message: "grid must be a non-empty list of finite values".into(),
            });
        }
        self.params.insert(name, values);
        Ok(self)
    }

    pub fn values(&self, name: &str) -> Option<&[f64]> {
        self.params.get(name).map(Vec::as_slice)
    }

    /// `n` assignments, each parameter drawn uniformly from its grid. Ids are
    /// `h000`, `h001`, ...
    pub fn sample<R: Rng>(&self, algorithm: &str, n: usize, rng: &mut R) -> Vec<HyperparamAssignment> {
        (0..n)
            .map(|i| HyperparamAssignment {
                algorithm: algorithm.to_string(),
                id: format!("h{i:03}"),
                params: self
                    .params
                    .iter()
                    .map(|(k, vs)| (k.clone(), vs[rng.random_range(0..vs.len())]))
                    .collect(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperparamAssignment {
    pub algorithm: String,
    pub id: String,
    pub params: BTreeMap<String, f64>,
}

impl HyperparamAssignment {
    pub fn get(&self, name: &str) -> Result<f64> {
        self.params.get(name).copied().ok_or_else(|| TestbedError::Hyperparam {
            name: name.to_string(),
            message: format!("missing from assignment {}", self.id),
        })
    }
}

fn non_negative(name: &str, v: f64) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(TestbedError::Hyperparam {
            name: name.into(),
            message: format!("must be finite and non-negative, got {v}"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcParams {
    pub laplace_smoothing: f64,
}

impl BcParams {
    pub fn from_assignment(h: &HyperparamAssignment) -> Result<Self> {
        Ok(Self {
            laplace_smoothing: non_negative("laplace_smoothing", h.get("laplace_smoothing")?)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CqParams {
    pub alpha: f64,
    pub learning_rate: f64,
    pub sweeps: usize,
}

impl CqParams {
    pub fn from_assignment(h: &HyperparamAssignment) -> Result<Self> {
        let sweeps = h.get("sweeps")?;
        if sweeps < 1.0 || sweeps.fract() != 0.0 {
            return Err(TestbedError::Hyperparam {
                name: "sweeps".into(),
                message: format!("must be a positive integer, got {sweeps}"),
            });
        }
        let learning_rate = h.get("learning_rate")?;
        if !(learning_rate > 0.0 && learning_rate <= 1.0) {
            return Err(TestbedError::Hyperparam {
                name: "learning_rate".into(),
                message: format!("must lie in (0, 1], got {learning_rate}"),
            });
        }
        Ok(Self {
            alpha: non_negative("alpha", h.get("alpha")?)?,
            learning_rate,
            sweeps: sweeps as usize,
        })
    }
}

/// Count-based behavioral cloning with Laplace smoothing. States absent from
/// the data get the uniform policy.
pub fn train_bc(train: &Dataset, params: &BcParams) -> Result<TabularPolicy> {
    let alpha = non_negative("laplace_smoothing", params.laplace_smoothing)?;
    let (ns, na) = (train.n_states(), train.n_actions());
    let counts = train.counts();
    let mut probs = vec![1.0 / na as f64; ns * na];
    for s in 0..ns {
        let row = &counts[s * na..(s + 1) * na];
        let total: u64 = row.iter().sum();
        if total == 0 {
            continue;
        }
        let denom = total as f64 + alpha * na as f64;
        for a in 0..na {
            probs[s * na + a] = (row[a] as f64 + alpha) / denom;
        }
    }
    TabularPolicy::new(ns, na, probs)
}

/// Q-learning over the logged transitions in dataset order with a penalty of
/// `alpha` on actions never logged in a state that has data. The penalty
/// enters both the bootstrap target and the final greedy step. Returns the
/// greedy policy (uniform where the state has no data) and the unpenalized Q.
pub fn train_conservative_q(train: &Dataset, params: &CqParams, gamma: f64) -> Result<(TabularPolicy, QTable)> {
    if train.n_transitions() == 0 {
        return Err(TestbedError::EmptyDataset);
    }
    let (ns, na) = (train.n_states(), train.n_actions());
    let counts = train.counts();
    let has_data: Vec<bool> = (0..ns)
        .map(|s| counts[s * na..(s + 1) * na].iter().any(|&c| c > 0))
        .collect();
    let penalty = |s: usize, a: usize| {
        if has_data[s] && counts[s * na + a] == 0 {
            params.alpha
        } else {
            0.0
        }
    };
    let penalized_max = |q: &QTable, s: usize| {
        (0..na)
            .map(|a| q.get(s, a) - penalty(s, a))
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let mut q = QTable::zeros(ns, na);
    for _ in 0..params.sweeps {
        for t in train.transitions() {
            let target = t.reward + gamma * penalized_max(&q, t.next_state);
            let old = q.get(t.state, t.action);
            q.set(t.state, t.action, old + params.learning_rate * (target - old));
        }
    }

    let mut probs = vec![1.0 / na as f64; ns * na];
    for s in (0..ns).filter(|&s| has_data[s]) {
        let row = &mut probs[s * na..(s + 1) * na];
        row.fill(0.0);
        let best = (0..na).fold(0, |best, a| {
            if q.get(s, a) - penalty(s, a) > q.get(s, best) - penalty(s, best) {
                a
            } else {
                best
            }
        });
        row[best] = 1.0;
    }
    Ok((TabularPolicy::new(ns, na, probs)?, q))
}
