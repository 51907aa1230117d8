//! Logged trajectories and their collection.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mdp::TabularMdp;
use crate::policy::{BehaviorLevel, TabularPolicy};
use crate::{Result, TestbedError};

/// One logged step. `done` marks the last step of its episode, whether the
/// next state is absorbing or the horizon was reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    pub done: bool,
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub level: Option<BehaviorLevel>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_states: usize,
    n_actions: usize,
    trajectories: Vec<Vec<Transition>>,
    provenance: Provenance,
}

/// Dataset sizes of the 99 / 999 / 9999 trajectory scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryCount {
    N99,
    N999,
    N9999,
}

impl TrajectoryCount {
    pub fn get(self) -> usize {
        match self {
            TrajectoryCount::N99 => 99,
            TrajectoryCount::N999 => 999,
            TrajectoryCount::N9999 => 9999,
        }
    }
}

impl TryFrom<usize> for TrajectoryCount {
    type Error = TestbedError;

    fn try_from(n: usize) -> Result<Self> {
        match n {
            99 => Ok(TrajectoryCount::N99),
            999 => Ok(TrajectoryCount::N999),
            9999 => Ok(TrajectoryCount::N9999),
            other => Err(TestbedError::TrajectoryCount(other)),
        }
    }
}

impl FromStr for TrajectoryCount {
    type Err = TestbedError;

    fn from_str(s: &str) -> Result<Self> {
        let n: usize = s.trim().parse().map_err(|_| TestbedError::Config(format!("`{s}` is not a count")))?;
        Self::try_from(n)
    }
}

impl fmt::Display for TrajectoryCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.get())
    }
}

impl Dataset {
    pub fn new(n_states: usize, n_actions: usize, trajectories: Vec<Vec<Transition>>) -> Result<Self> {
        let in_range = |t: &Transition| t.state < n_states && t.next_state < n_states && t.action < n_actions;
        if !trajectories.iter().flatten().all(in_range) {
            return Err(TestbedError::ShapeMismatch);
        }
        Ok(Self {
            n_states,
            n_actions,
            trajectories,
            provenance: Provenance::default(),
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn trajectories(&self) -> &[Vec<Transition>] {
        &self.trajectories
    }

    /// Number of trajectories.
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// All transitions, trajectory by trajectory.
    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.trajectories.iter().flatten()
    }

    pub fn n_transitions(&self) -> usize {
        self.trajectories.iter().map(Vec::len).sum()
    }

    /// First state of every non-empty trajectory.
    pub fn initial_states(&self) -> impl Iterator<Item = usize> + '_ {
        self.trajectories.iter().filter_map(|t| t.first().map(|x| x.state))
    }

    /// Visit counts indexed `s * A + a`.
    pub fn counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_states * self.n_actions];
        for t in self.transitions() {
            counts[t.state * self.n_actions + t.action] += 1;
        }
        counts
    }

    /// Actions logged in state `s`, ascending.
    pub fn observed_actions(&self, s: usize) -> Vec<usize> {
        let counts = self.counts();
        (0..self.n_actions)
            .filter(|&a| counts[s * self.n_actions + a] > 0)
            .collect()
    }
}

/// Collects `n` full episodes under `policy`. An episode stops when it
/// enters an absorbing state or after `horizon` steps.
pub fn collect_trajectories(mdp: &TabularMdp, policy: &TabularPolicy, n: usize, seed: u64) -> Result<Dataset> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    if policy.n_states() != ns || policy.n_actions() != na {
        return Err(TestbedError::ShapeMismatch);
    }
    let weighted = |w: &[f64]| WeightedIndex::new(w).expect("rows are validated distributions");
    let start = weighted(mdp.initial());
    let actions: Vec<_> = (0..ns).map(|s| weighted(policy.row(s))).collect();
    let moves: Vec<_> = (0..ns * na)
        .map(|i| weighted(mdp.next_states(i / na, i % na)))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trajectories = Vec::with_capacity(n);
    for _ in 0..n {
        let mut s = start.sample(&mut rng);
        let mut steps = Vec::new();
        for t in 0..mdp.horizon() {
            if mdp.is_absorbing(s) {
                break;
            }
            let a = actions[s].sample(&mut rng);
            let next = moves[s * na + a].sample(&mut rng);
            steps.push(Transition {
                state: s,
                action: a,
                reward: mdp.reward(s, a),
                next_state: next,
                done: mdp.is_absorbing(next) || t + 1 == mdp.horizon(),
            });
            s = next;
        }
        trajectories.push(steps);
    }
    Ok(Dataset {
        n_states: ns,
        n_actions: na,
        trajectories,
        provenance: Provenance { level: None, seed },
    })
}

pub fn collect_dataset(mdp: &TabularMdp, policy: &TabularPolicy, count: TrajectoryCount, seed: u64) -> Result<Dataset> {
    collect_trajectories(mdp, policy, count.get(), seed)
}

/// Trajectory-wise random split. The training part holds `round(ratio * n)`
/// trajectories, kept within `[1, n - 1]`; both parts keep the original
/// trajectory order.
pub fn split_train_validation(dataset: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(TestbedError::SplitRatio(ratio));
    }
    let n = dataset.len();
    if n < 2 {
        return Err(TestbedError::TooFewTrajectories(n));
    }
    let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train_idx = order[..n_train].to_vec();
    let mut valid_idx = order[n_train..].to_vec();
    train_idx.sort_unstable();
    valid_idx.sort_unstable();
    let part = |idx: &[usize]| Dataset {
        n_states: dataset.n_states,
        n_actions: dataset.n_actions,
        trajectories: idx.iter().map(|&i| dataset.trajectories[i].clone()).collect(),
        provenance: dataset.provenance.clone(),
    };
    Ok((part(&train_idx), part(&valid_idx)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{default_gridworld, deterministic_gridworld};
    use crate::planning::value_iteration;

    #[test]
    fn exact_count_and_reachability() {
        let mdp = default_gridworld();
        let policy = TabularPolicy::uniform(64, 4);
        let data = collect_dataset(&mdp, &policy, TrajectoryCount::N99, 3).unwrap();
        assert_eq!(data.len(), 99);
        for t in data.transitions() {
            assert!(mdp.next_states(t.state, t.action)[t.next_state] > 0.0);
            assert_eq!(t.reward, mdp.reward(t.state, t.action));
        }
        for traj in data.trajectories() {
            assert!(traj.last().unwrap().done);
            assert!(traj[..traj.len() - 1].iter().all(|t| !t.done));
        }
        assert_eq!(data, collect_dataset(&mdp, &policy, TrajectoryCount::N99, 3).unwrap());
    }

    #[test]
    fn deterministic_everything_gives_identical_trajectories() {
        let mdp = deterministic_gridworld();
        let q = value_iteration(&mdp, 1e-8).unwrap();
        let data = collect_trajectories(&mdp, &TabularPolicy::greedy(&q), 20, 11).unwrap();
        let first = &data.trajectories()[0];
        assert!(data.trajectories().iter().all(|t| t == first));
        assert_eq!(first.len(), 14);
    }

    #[test]
    fn counts_are_scheme_only() {
        assert!(TrajectoryCount::try_from(100).is_err());
        assert_eq!("9999".parse::<TrajectoryCount>().unwrap(), TrajectoryCount::N9999);
    }

    #[test]
    fn split_sizes_and_partition() {
        let mdp = default_gridworld();
        let data = collect_trajectories(&mdp, &TabularPolicy::uniform(64, 4), 100, 1).unwrap();
        let (train, valid) = split_train_validation(&data, 0.8, 42).unwrap();
        assert_eq!((train.len(), valid.len()), (80, 20));
        assert_eq!((train.clone(), valid.clone()), split_train_validation(&data, 0.8, 42).unwrap());
        let mut union: Vec<_> = train.trajectories().iter().chain(valid.trajectories()).cloned().collect();
        let mut original = data.trajectories().to_vec();
        let key = |t: &Vec<Transition>| format!("{t:?}");
        union.sort_by_key(key);
        original.sort_by_key(key);
        assert_eq!(union, original);
    }

    #[test]
    fn split_errors() {
        let one = Dataset::new(1, 1, vec![vec![]]).unwrap();
        assert!(matches!(split_train_validation(&one, 0.5, 0), Err(TestbedError::TooFewTrajectories(1))));
        let two = Dataset::new(1, 1, vec![vec![], vec![]]).unwrap();
        assert!(matches!(split_train_validation(&two, 1.0, 0), Err(TestbedError::SplitRatio(_))));
        let (a, b) = split_train_validation(&two, 0.01, 0).unwrap();
        assert_eq!((a.len(), b.len()), (1, 1));
    }
}
