use std::fmt;
use std::str::FromStr;

use crate::mdp::QTable;
use crate::{Result, TestbedError};

/// Stochastic policy `π(a | s)`, row-major by state.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions || n_actions == 0 {
            return Err(TestbedError::InvalidPolicy("shape does not match S x A".into()));
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(TestbedError::InvalidPolicy(format!(
                    "row for state {s} is not a distribution"
                )));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// Deterministic policy taking `actions[s]` in state `s`.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Self {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[s * n_actions + a] = 1.0;
        }
        Self {
            n_states: actions.len(),
            n_actions,
            probs,
        }
    }

    pub fn greedy(q: &QTable) -> Self {
        let actions: Vec<usize> = (0..q.n_states()).map(|s| q.greedy_action(s)).collect();
        Self::deterministic(q.n_actions(), &actions)
    }

    /// `epsilon / A` on every action plus `1 - epsilon` on the greedy one.
    pub fn epsilon_greedy(q: &QTable, epsilon: f64) -> Self {
        let a_count = q.n_actions();
        let mut probs = vec![epsilon / a_count as f64; q.n_states() * a_count];
        for s in 0..q.n_states() {
            probs[s * a_count + q.greedy_action(s)] += 1.0 - epsilon;
        }
        Self {
            n_states: q.n_states(),
            n_actions: a_count,
            probs,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// `Σ_a π(a|s) q(s, a)`.
    pub fn expected_value(&self, q: &QTable, s: usize) -> f64 {
        self.row(s).iter().zip(q.row(s)).map(|(p, v)| p * v).sum()
    }

    /// Actions with positive probability in `s`.
    pub fn support(&self, s: usize) -> Vec<usize> {
        (0..self.n_actions).filter(|&a| self.prob(s, a) > 0.0).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BehaviorLevel {
    Low,
    Medium,
    High,
}

impl fmt::Display for BehaviorLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BehaviorLevel::Low => "low",
            BehaviorLevel::Medium => "medium",
            BehaviorLevel::High => "high",
        })
    }
}

impl FromStr for BehaviorLevel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "low" => Ok(BehaviorLevel::Low),
            "medium" => Ok(BehaviorLevel::Medium),
            "high" => Ok(BehaviorLevel::High),
            other => Err(format!("behavior level must be low, medium or high, got `{other}`")),
        }
    }
}

/// Exploration rate of each expertise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorEpsilons {
    pub low: f64,
    pub medium: f64,
    pub high: f64,
}

impl Default for BehaviorEpsilons {
    fn default() -> Self {
        Self {
            low: 0.6,
            medium: 0.3,
            high: 0.1,
        }
    }
}

impl BehaviorEpsilons {
    pub fn validate(&self) -> Result<()> {
        let all = [self.low, self.medium, self.high];
        if all.iter().any(|e| !(0.0..=1.0).contains(e)) || !(self.low > self.medium && self.medium > self.high) {
            return Err(TestbedError::NonMonotoneEpsilons(self.low, self.medium, self.high));
        }
        Ok(())
    }

    pub fn for_level(&self, level: BehaviorLevel) -> f64 {
        match level {
            BehaviorLevel::Low => self.low,
            BehaviorLevel::Medium => self.medium,
            BehaviorLevel::High => self.high,
        }
    }
}

/// Epsilon-greedy data-collection policy for one expertise level.
pub fn make_behavior_policy(
    level: BehaviorLevel,
    q_star: &QTable,
    epsilons: &BehaviorEpsilons,
) -> Result<TabularPolicy> {
    epsilons.validate()?;
    Ok(TabularPolicy::epsilon_greedy(q_star, epsilons.for_level(level)))
}
