//! Finite MDPs, Q tables and the plain-text MDP fixture format.
//!
//! Fixture layout (whitespace separated numbers, `#` starts a comment):
//!
//! ```text
//! states = 64
//! actions = 4
//! gamma = 0.95
//! horizon = 100
//! [initial]
//! <states probabilities>
//! [rewards]
//! <one line per state: actions rewards>
//! [transitions]
//! <one line per (state, action), state-major: states probabilities>
//! ```

use std::fmt::Write as _;

use crate::{Result, TestbedError};

const ROW_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// `P(s' | s, a)` at `(s * A + a) * S + s'`.
    transitions: Vec<f64>,
    /// Expected reward at `s * A + a`.
    rewards: Vec<f64>,
    gamma: f64,
    initial: Vec<f64>,
    horizon: usize,
    absorbing: Vec<bool>,
}

fn check_distribution(row: &[f64], what: impl FnOnce() -> String) -> Result<()> {
    let sum: f64 = row.iter().sum();
    if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) || (sum - 1.0).abs() > ROW_TOL {
        return Err(TestbedError::InvalidMdp(format!("{} does not sum to 1", what())));
    }
    Ok(())
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        gamma: f64,
        initial: Vec<f64>,
        horizon: usize,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(TestbedError::InvalidMdp("empty state or action space".into()));
        }
        if transitions.len() != n_states * n_actions * n_states
            || rewards.len() != n_states * n_actions
            || initial.len() != n_states
        {
            return Err(TestbedError::InvalidMdp("block sizes do not match S and A".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(TestbedError::InvalidMdp(format!("gamma {gamma} outside [0, 1)")));
        }
        if horizon == 0 {
            return Err(TestbedError::InvalidMdp("horizon must be positive".into()));
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(TestbedError::InvalidMdp("non-finite reward".into()));
        }
        for (row, chunk) in transitions.chunks(n_states).enumerate() {
            check_distribution(chunk, || {
                format!("transition row (s={}, a={})", row / n_actions, row % n_actions)
            })?;
        }
        check_distribution(&initial, || "initial distribution".into())?;
        let absorbing = (0..n_states)
            .map(|s| {
                (0..n_actions).all(|a| {
                    transitions[(s * n_actions + a) * n_states + s] == 1.0
                        && rewards[s * n_actions + a] == 0.0
                })
            })
            .collect();
        Ok(Self {
            n_states,
            n_actions,
            transitions,
            rewards,
            gamma,
            initial,
            horizon,
            absorbing,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    /// `P(· | s, a)`.
    pub fn next_states(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    /// Zero-reward self loop under every action; episodes end on entry.
    pub fn is_absorbing(&self, s: usize) -> bool {
        self.absorbing[s]
    }

    /// Same dynamics with a different discount.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(
            self.n_states,
            self.n_actions,
            self.transitions.clone(),
            self.rewards.clone(),
            gamma,
            self.initial.clone(),
            self.horizon,
        )
    }

    pub fn is_deterministic(&self) -> bool {
        self.transitions.iter().all(|&p| p == 0.0 || p == 1.0)
    }

    pub fn to_fixture(&self) -> String {
        let mut out = String::new();
        let join = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(out, "states = {}", self.n_states).unwrap();
        writeln!(out, "actions = {}", self.n_actions).unwrap();
        writeln!(out, "gamma = {}", self.gamma).unwrap();
        writeln!(out, "horizon = {}", self.horizon).unwrap();
        writeln!(out, "[initial]\n{}", join(&self.initial)).unwrap();
        writeln!(out, "[rewards]").unwrap();
        for row in self.rewards.chunks(self.n_actions) {
            writeln!(out, "{}", join(row)).unwrap();
        }
        writeln!(out, "[transitions]").unwrap();
        for row in self.transitions.chunks(self.n_states) {
            writeln!(out, "{}", join(row)).unwrap();
        }
        out
    }

    pub fn from_fixture(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: String| TestbedError::Fixture { line, message: msg };
        let mut header = std::collections::BTreeMap::new();
        let mut section: Option<&str> = None;
        let mut blocks: std::collections::BTreeMap<&str, Vec<f64>> = Default::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|c| c.strip_suffix(']')) {
                match name {
                    "initial" | "rewards" | "transitions" => {
                        if blocks.contains_key(name) {
                            return Err(bad(line, format!("duplicate section [{name}]")));
                        }
                        blocks.insert(name, Vec::new());
                        section = Some(name);
                    }
                    other => return Err(bad(line, format!("unknown section [{other}]"))),
                }
                continue;
            }
            match section {
                None => {
                    let (k, v) = content
                        .split_once('=')
                        .ok_or_else(|| bad(line, "expected `key = value`".into()))?;
                    header.insert(k.trim().to_string(), (line, v.trim().to_string()));
                }
                Some(name) => {
                    let block = blocks.get_mut(name).expect("section opened");
                    for tok in content.split_whitespace() {
                        let v: f64 = tok
                            .parse()
                            .map_err(|_| bad(line, format!("cannot parse number `{tok}`")))?;
                        block.push(v);
                    }
                }
            }
        }
        let field = |key: &str| -> Result<&(usize, String)> {
            header
                .get(key)
                .ok_or_else(|| bad(0, format!("missing header `{key}`")))
        };
        let int = |key: &str| -> Result<usize> {
            let (line, v) = field(key)?;
            v.parse().map_err(|_| bad(*line, format!("`{key}` must be a non-negative integer")))
        };
        let n_states = int("states")?;
        let n_actions = int("actions")?;
        let horizon = int("horizon")?;
        let gamma = {
            let (line, v) = field("gamma")?;
            v.parse::<f64>()
                .map_err(|_| bad(*line, "`gamma` must be a number".into()))?
        };
        let mut take = |name: &str| {
            blocks
                .remove(name)
                .ok_or_else(|| bad(0, format!("missing section [{name}]")))
        };
        let initial = take("initial")?;
        let rewards = take("rewards")?;
        let transitions = take("transitions")?;
        Self::new(n_states, n_actions, transitions, rewards, gamma, initial, horizon)
    }
}

/// Action values, row-major by state.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn from_values(n_states: usize, n_actions: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n_states * n_actions, "Q table shape");
        Self {
            n_states,
            n_actions,
            values,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Lowest-index action with the largest value.
    pub fn greedy_action(&self, s: usize) -> usize {
        let row = self.row(s);
        let mut best = 0;
        for a in 1..row.len() {
            if row[a] > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn max_value(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Rectangular gridworld with a rewarding absorbing goal and optional
/// "windy" cells that push the agent one extra row north.
#[derive(Debug, Clone, PartialEq)]
pub struct GridworldSpec {
    pub width: usize,
    pub height: usize,
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub goal_reward: f64,
    pub step_reward: f64,
    /// Probability a move out of a windy cell is pushed north.
    pub wind: f64,
    pub windy_cells: Vec<(usize, usize)>,
    pub gamma: f64,
    pub horizon: usize,
}

/// Actions: north, east, south, west.
pub const MOVES: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

impl GridworldSpec {
    /// 8x8 grid, start top-left, goal bottom-right, wind through the middle
    /// columns.
    pub fn default_8x8() -> Self {
        let windy_cells = (1..=6)
            .flat_map(|row| [(row, 3), (row, 4)])
            .collect();
        Self {
            width: 8,
            height: 8,
            start: (0, 0),
            goal: (7, 7),
            goal_reward: 10.0,
            step_reward: -0.1,
            wind: 0.25,
            windy_cells,
            gamma: 0.95,
            horizon: 100,
        }
    }

    pub fn deterministic_8x8() -> Self {
        Self {
            wind: 0.0,
            ..Self::default_8x8()
        }
    }

    fn index(&self, (row, col): (usize, usize)) -> usize {
        row * self.width + col
    }

    fn step(&self, (row, col): (usize, usize), (dr, dc): (isize, isize)) -> (usize, usize) {
        let r = (row as isize + dr).clamp(0, self.height as isize - 1) as usize;
        let c = (col as isize + dc).clamp(0, self.width as isize - 1) as usize;
        (r, c)
    }

    pub fn build(&self) -> Result<TabularMdp> {
        let n_states = self.width * self.height;
        let n_actions = MOVES.len();
        let goal = self.index(self.goal);
        let mut transitions = vec![0.0; n_states * n_actions * n_states];
        let mut rewards = vec![0.0; n_states * n_actions];
        for row in 0..self.height {
            for col in 0..self.width {
                let s = self.index((row, col));
                for (a, &mv) in MOVES.iter().enumerate() {
                    let base = (s * n_actions + a) * n_states;
                    if s == goal {
                        transitions[base + s] = 1.0;
                        continue;
                    }
                    let landed = self.step((row, col), mv);
                    let windy = self.wind > 0.0 && self.windy_cells.contains(&(row, col));
                    if windy {
                        let pushed = self.step(landed, MOVES[0]);
                        transitions[base + self.index(landed)] += 1.0 - self.wind;
                        transitions[base + self.index(pushed)] += self.wind;
                    } else {
                        transitions[base + self.index(landed)] = 1.0;
                    }
                    rewards[s * n_actions + a] =
                        self.step_reward + self.goal_reward * transitions[base + goal];
                }
            }
        }
        let mut initial = vec![0.0; n_states];
        initial[self.index(self.start)] = 1.0;
        TabularMdp::new(
            n_states,
            n_actions,
            transitions,
            rewards,
            self.gamma,
            initial,
            self.horizon,
        )
    }
}

/// The shipped windy 8x8 gridworld.
pub fn default_gridworld() -> TabularMdp {
    TabularMdp::from_fixture(include_str!("../fixtures/gridworld8x8.mdp"))
        .expect("shipped fixture is valid")
}

/// The shipped gridworld with wind disabled.
pub fn deterministic_gridworld() -> TabularMdp {
    TabularMdp::from_fixture(include_str!("../fixtures/gridworld8x8_deterministic.mdp"))
        .expect("shipped fixture is valid")
}
