//! Offline policy-selection scores computed from a validation dataset.

use eop_core::selection::Direction;

use crate::dataset::Dataset;
use crate::mdp::QTable;
use crate::policy::TabularPolicy;
use crate::{Result, TestbedError};

pub const FQE: &str = "fqe";
pub const TD_ERROR: &str = "td_error";
pub const ACTION_DIFFERENCE: &str = "action_difference";

/// Every score method with the direction it is ranked in.
pub const METHODS: [(&str, Direction); 3] = [
    (FQE, Direction::HigherIsBetter),
    (TD_ERROR, Direction::LowerIsBetter),
    (ACTION_DIFFERENCE, Direction::LowerIsBetter),
];

/// Per-cell empirical reward mean and next-state distribution.
struct EmpiricalModel {
    n_actions: usize,
    reward: Vec<f64>,
    next: Vec<Vec<(usize, f64)>>,
}

impl EmpiricalModel {
    fn fit(data: &Dataset) -> Self {
        let (ns, na) = (data.n_states(), data.n_actions());
        let mut reward = vec![0.0; ns * na];
        let mut counts = vec![0u64; ns * na];
        let mut next_counts: Vec<std::collections::BTreeMap<usize, u64>> = vec![Default::default(); ns * na];
        for t in data.transitions() {
            let cell = t.state * na + t.action;
            reward[cell] += t.reward;
            counts[cell] += 1;
            *next_counts[cell].entry(t.next_state).or_default() += 1;
        }
        let next = next_counts
            .into_iter()
            .zip(&counts)
            .map(|(m, &n)| m.into_iter().map(|(s, c)| (s, c as f64 / n as f64)).collect())
            .collect();
        for (r, &n) in reward.iter_mut().zip(&counts) {
            if n > 0 {
                *r /= n as f64;
            }
        }
        Self {
            n_actions: na,
            reward,
            next,
        }
    }
}

fn check(policy: &TabularPolicy, data: &Dataset) -> Result<()> {
    if data.n_transitions() == 0 {
        return Err(TestbedError::EmptyValidation);
    }
    if policy.n_states() != data.n_states() || policy.n_actions() != data.n_actions() {
        return Err(TestbedError::ShapeMismatch);
    }
    Ok(())
}

/// Tabular fitted-Q evaluation: `iterations` synchronous backups of
/// `Q(s,a) <- r̂(s,a) + γ Σ p̂(s'|s,a) Σ π(a'|s') Q(s',a')` on the empirical
/// model. Cells without data stay 0.
pub fn fqe_q(policy: &TabularPolicy, data: &Dataset, gamma: f64, iterations: usize) -> Result<QTable> {
    check(policy, data)?;
    let model = EmpiricalModel::fit(data);
    let (ns, na) = (data.n_states(), model.n_actions);
    let mut q = QTable::zeros(ns, na);
    for _ in 0..iterations {
        let v: Vec<f64> = (0..ns).map(|s| policy.expected_value(&q, s)).collect();
        let mut next = QTable::zeros(ns, na);
        for (cell, successors) in model.next.iter().enumerate() {
            if successors.is_empty() {
                continue;
            }
            let future: f64 = successors.iter().map(|&(s2, p)| p * v[s2]).sum();
            next.set(cell / na, cell % na, model.reward[cell] + gamma * future);
        }
        q = next;
    }
    Ok(q)
}

/// Mean over validation initial states of `Σ_a π(a|s0) Q_fqe(s0, a)`.
pub fn fqe_score(policy: &TabularPolicy, validation: &Dataset, gamma: f64, iterations: usize) -> Result<f64> {
    let q = fqe_q(policy, validation, gamma, iterations)?;
    let starts: Vec<usize> = validation.initial_states().collect();
    Ok(starts.iter().map(|&s| policy.expected_value(&q, s)).sum::<f64>() / starts.len() as f64)
}

/// Mean absolute temporal difference of `q` under `policy`.
pub fn td_error_score(policy: &TabularPolicy, q: &QTable, validation: &Dataset, gamma: f64) -> Result<f64> {
    check(policy, validation)?;
    let total: f64 = validation
        .transitions()
        .map(|t| (t.reward + gamma * policy.expected_value(q, t.next_state) - q.get(t.state, t.action)).abs())
        .sum();
    Ok(total / validation.n_transitions() as f64)
}

/// Mean probability that `policy` disagrees with the logged action.
pub fn action_difference_score(policy: &TabularPolicy, validation: &Dataset) -> Result<f64> {
    check(policy, validation)?;
    let total: f64 = validation.transitions().map(|t| 1.0 - policy.prob(t.state, t.action)).sum();
    Ok(total / validation.n_transitions() as f64)
}
