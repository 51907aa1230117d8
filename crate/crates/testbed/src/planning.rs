//! Exact dynamic programming on a known MDP.

use nalgebra::{DMatrix, DVector};

use crate::mdp::{QTable, TabularMdp};
use crate::policy::TabularPolicy;
use crate::{Result, TestbedError};

fn bellman_optimal(mdp: &TabularMdp, q: &QTable) -> QTable {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let v: Vec<f64> = (0..ns).map(|s| q.max_value(s)).collect();
    let mut next = QTable::zeros(ns, na);
    for s in 0..ns {
        for a in 0..na {
            let future: f64 = mdp.next_states(s, a).iter().zip(&v).map(|(p, v)| p * v).sum();
            next.set(s, a, mdp.reward(s, a) + mdp.gamma() * future);
        }
    }
    next
}

/// Optimal action values, iterated until the sup-norm Bellman residual is at
/// most `tol`.
pub fn value_iteration(mdp: &TabularMdp, tol: f64) -> Result<QTable> {
    if !(tol > 0.0) {
        return Err(TestbedError::InvalidTolerance(tol));
    }
    let mut q = QTable::zeros(mdp.n_states(), mdp.n_actions());
    loop {
        let next = bellman_optimal(mdp, &q);
        let residual = next.max_abs_diff(&q);
        q = next;
        if residual <= tol * (1.0 - mdp.gamma()) {
            // ||T q - q|| <= gamma * residual once more, safely below tol
            return Ok(q);
        }
    }
}

/// Sup-norm of `T q - q` under the optimality operator.
pub fn bellman_residual(mdp: &TabularMdp, q: &QTable) -> f64 {
    bellman_optimal(mdp, q).max_abs_diff(q)
}

/// Solves `(I - γ P_π) v = r_π` for the state values of `policy`.
pub fn state_values(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<Vec<f64>> {
    let ns = mdp.n_states();
    let mut system = DMatrix::<f64>::identity(ns, ns);
    let mut r_pi = DVector::<f64>::zeros(ns);
    for s in 0..ns {
        for a in 0..mdp.n_actions() {
            let pa = policy.prob(s, a);
            if pa == 0.0 {
                continue;
            }
            r_pi[s] += pa * mdp.reward(s, a);
            for (s2, &p) in mdp.next_states(s, a).iter().enumerate() {
                system[(s, s2)] -= mdp.gamma() * pa * p;
            }
        }
    }
    let v = system.lu().solve(&r_pi).ok_or(TestbedError::SingularSystem)?;
    Ok(v.iter().copied().collect())
}

/// `Q_π(s, a) = R(s, a) + γ Σ P(s'|s,a) V_π(s')`.
pub fn action_values(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<QTable> {
    let v = state_values(mdp, policy)?;
    let mut q = QTable::zeros(mdp.n_states(), mdp.n_actions());
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let future: f64 = mdp.next_states(s, a).iter().zip(&v).map(|(p, v)| p * v).sum();
            q.set(s, a, mdp.reward(s, a) + mdp.gamma() * future);
        }
    }
    Ok(q)
}

/// True online value of `policy`: the initial-state-weighted discounted
/// return, computed exactly.
pub fn policy_evaluation_exact(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<f64> {
    let v = state_values(mdp, policy)?;
    Ok(mdp.initial().iter().zip(&v).map(|(p, v)| p * v).sum())
}

/// Expected fraction of logged transitions at each `(s, a)` when episodes of
/// at most `horizon` steps are collected under `policy` and end on entering
/// an absorbing state. Indexed `s * A + a`.
pub fn occupancy(mdp: &TabularMdp, policy: &TabularPolicy) -> Vec<f64> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut visits = vec![0.0; ns * na];
    let mut dist: Vec<f64> = mdp.initial().to_vec();
    for _ in 0..mdp.horizon() {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            if dist[s] == 0.0 || mdp.is_absorbing(s) {
                continue;
            }
            for a in 0..na {
                let mass = dist[s] * policy.prob(s, a);
                if mass == 0.0 {
                    continue;
                }
                visits[s * na + a] += mass;
                for (s2, &p) in mdp.next_states(s, a).iter().enumerate() {
                    if p > 0.0 && !mdp.is_absorbing(s2) {
                        next[s2] += mass * p;
                    }
                }
            }
        }
        dist = next;
    }
    let total: f64 = visits.iter().sum();
    visits.iter().map(|v| v / total).collect()
}
