//! The full offline RL evaluation loop at desk scale: collect a dataset,
//! train every sampled hyperparameter assignment on several train/validation
//! splits, record exact online values and score each policy offline.

use std::path::PathBuf;
use std::str::FromStr;

use eop_core::io::{KeyValues, RunRecord, ScoreRound};
use eop_core::report::{aggregate_seeds, Aggregation, PolicyValue};
use eop_core::rng::derive_seed;
use eop_core::selection::ScoreTable;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{collect_dataset, split_train_validation, Dataset, Provenance, TrajectoryCount};
use crate::mdp::{default_gridworld, deterministic_gridworld, QTable, TabularMdp};
use crate::planning::{policy_evaluation_exact, value_iteration};
use crate::policy::{make_behavior_policy, BehaviorEpsilons, BehaviorLevel, TabularPolicy};
use crate::scoring::{action_difference_score, fqe_q, fqe_score, td_error_score, ACTION_DIFFERENCE, FQE, METHODS, TD_ERROR};
use crate::train::{train_bc, train_conservative_q, BcParams, CqParams, HyperparamAssignment, HyperparamGrid};
use crate::{Result, TestbedError};

pub const BC: &str = "BC";
pub const CONSERVATIVE_Q: &str = "ConservativeQ";

const DATA_STREAM: u64 = 0;
const SPLIT_STREAM: u64 = 1;
const HYPERPARAM_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum MdpChoice {
    Windy,
    Deterministic,
    File(PathBuf),
}

impl MdpChoice {
    pub fn load(&self) -> Result<TabularMdp> {
        match self {
            MdpChoice::Windy => Ok(default_gridworld()),
            MdpChoice::Deterministic => Ok(deterministic_gridworld()),
            MdpChoice::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| TestbedError::Config(format!("cannot read mdp file {}: {e}", path.display())))?;
                TabularMdp::from_fixture(&text)
            }
        }
    }
}

impl FromStr for MdpChoice {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "windy" => MdpChoice::Windy,
            "deterministic" => MdpChoice::Deterministic,
            path => MdpChoice::File(PathBuf::from(path)),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub environment: String,
    pub mdp: MdpChoice,
    pub behavior_level: BehaviorLevel,
    pub epsilons: BehaviorEpsilons,
    pub trajectories: TrajectoryCount,
    pub split_ratio: f64,
    /// Hyperparameter assignments sampled per algorithm.
    pub assignments: usize,
    /// Training seeds per assignment; seed `k` trains on split `k`.
    pub seeds: usize,
    pub master_seed: u64,
    pub fqe_iterations: usize,
    pub vi_tolerance: f64,
    pub algorithms: Vec<String>,
    pub bc_grid: HyperparamGrid,
    pub cq_grid: HyperparamGrid,
    pub aggregation: Aggregation,
}

const KEYS: [&str; 17] = [
    "environment",
    "mdp",
    "behavior_level",
    "epsilons",
    "trajectories",
    "split_ratio",
    "assignments",
    "seeds",
    "master_seed",
    "fqe_iterations",
    "vi_tolerance",
    "algorithms",
    "bc.laplace_smoothing",
    "cq.alpha",
    "cq.learning_rate",
    "cq.sweeps",
    "aggregation",
];

impl Default for PipelineConfig {
    fn default() -> Self {
        let grid = |pairs: &[(&str, &[f64])]| {
            pairs
                .iter()
                .try_fold(HyperparamGrid::new(), |g, (k, v)| g.with(*k, v.to_vec()))
                .expect("default grids are valid")
        };
        Self {
            environment: "gridworld".into(),
            mdp: MdpChoice::Windy,
            behavior_level: BehaviorLevel::Medium,
            epsilons: BehaviorEpsilons::default(),
            trajectories: TrajectoryCount::N999,
            split_ratio: 0.8,
            assignments: 10,
            seeds: 3,
            master_seed: 0,
            fqe_iterations: 500,
            vi_tolerance: 1e-8,
            algorithms: vec![BC.into(), CONSERVATIVE_Q.into()],
            bc_grid: grid(&[("laplace_smoothing", &[0.0, 0.01, 0.1, 1.0, 10.0])]),
            cq_grid: grid(&[
                ("alpha", &[0.0, 0.1, 1.0, 10.0, 100.0]),
                ("learning_rate", &[0.1, 0.3, 0.5, 1.0]),
                ("sweeps", &[1.0, 2.0, 5.0, 10.0, 20.0]),
            ]),
            aggregation: Aggregation::Mean,
        }
    }
}

impl PipelineConfig {
    /// Defaults overridden by the given keys. Unknown keys are rejected.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let cfg_err = |e: eop_core::io::DataError| TestbedError::Config(e.to_string());
        if let Some(key) = kv.keys().find(|k| !KEYS.contains(k)) {
            return Err(TestbedError::Config(format!(
                "line {}: unknown key `{key}`",
                kv.line_of(key).unwrap_or(0)
            )));
        }
        let mut cfg = Self::default();
        if let Some(v) = kv.get("environment") {
            cfg.environment = v.to_string();
        }
        if let Some(v) = kv.parse("mdp").map_err(cfg_err)? {
            cfg.mdp = v;
        }
        if let Some(v) = kv.parse("behavior_level").map_err(cfg_err)? {
            cfg.behavior_level = v;
        }
        if let Some(v) = kv.parse_list::<f64>("epsilons").map_err(cfg_err)? {
            let [low, medium, high] = v[..] else {
                return Err(TestbedError::Config("`epsilons` needs three values: low, medium, high".into()));
            };
            cfg.epsilons = BehaviorEpsilons { low, medium, high };
        }
        if let Some(v) = kv.parse::<usize>("trajectories").map_err(cfg_err)? {
            cfg.trajectories = TrajectoryCount::try_from(v)?;
        }
        if let Some(v) = kv.parse("split_ratio").map_err(cfg_err)? {
            cfg.split_ratio = v;
        }
        if let Some(v) = kv.parse("assignments").map_err(cfg_err)? {
            cfg.assignments = v;
        }
        if let Some(v) = kv.parse("seeds").map_err(cfg_err)? {
            cfg.seeds = v;
        }
        if let Some(v) = kv.parse("master_seed").map_err(cfg_err)? {
            cfg.master_seed = v;
        }
        if let Some(v) = kv.parse("fqe_iterations").map_err(cfg_err)? {
            cfg.fqe_iterations = v;
        }
        if let Some(v) = kv.parse("vi_tolerance").map_err(cfg_err)? {
            cfg.vi_tolerance = v;
        }
        if let Some(v) = kv.parse_list::<String>("algorithms").map_err(cfg_err)? {
            cfg.algorithms = v;
        }
        if let Some(v) = kv.parse_list("bc.laplace_smoothing").map_err(cfg_err)? {
            cfg.bc_grid = cfg.bc_grid.with("laplace_smoothing", v)?;
        }
        for (key, name) in [("cq.alpha", "alpha"), ("cq.learning_rate", "learning_rate"), ("cq.sweeps", "sweeps")] {
            if let Some(v) = kv.parse_list(key).map_err(cfg_err)? {
                cfg.cq_grid = cfg.cq_grid.with(name, v)?;
            }
        }
        if let Some(v) = kv.parse("aggregation").map_err(cfg_err)? {
            cfg.aggregation = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(TestbedError::Config(m.into()));
        if self.assignments == 0 {
            return fail("`assignments` must be positive");
        }
        if self.seeds == 0 {
            return fail("`seeds` must be positive");
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(TestbedError::SplitRatio(self.split_ratio));
        }
        if !(self.vi_tolerance > 0.0) {
            return Err(TestbedError::InvalidTolerance(self.vi_tolerance));
        }
        if self.algorithms.is_empty() {
            return fail("`algorithms` must name at least one algorithm");
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            if a != BC && a != CONSERVATIVE_Q {
                return Err(TestbedError::Config(format!(
                    "unknown algorithm `{a}`; expected {BC} or {CONSERVATIVE_Q}"
                )));
            }
            if self.algorithms[..i].contains(a) {
                return Err(TestbedError::Config(format!("algorithm `{a}` listed twice")));
            }
        }
        self.epsilons.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// One record per (algorithm, assignment, seed).
    pub runs: Vec<RunRecord>,
    /// One score table per seed, policies keyed `algorithm:hyperparam_id`.
    pub rounds: Vec<ScoreRound>,
    pub assignments: Vec<HyperparamAssignment>,
    /// Seed-aggregated online value per assignment.
    pub values: Vec<PolicyValue>,
    pub behavior_value: f64,
}

struct Job<'a> {
    assignment: &'a HyperparamAssignment,
    seed: usize,
}

struct JobResult {
    value: f64,
    scores: [f64; 3],
}

fn train(assignment: &HyperparamAssignment, train: &Dataset, gamma: f64, fqe_iterations: usize) -> Result<(TabularPolicy, QTable)> {
    if assignment.algorithm == BC {
        let policy = train_bc(train, &BcParams::from_assignment(assignment)?)?;
        let q = fqe_q(&policy, train, gamma, fqe_iterations)?;
        Ok((policy, q))
    } else {
        train_conservative_q(train, &CqParams::from_assignment(assignment)?, gamma)
    }
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let mdp = config.mdp.load()?;
    let gamma = mdp.gamma();
    let q_star = value_iteration(&mdp, config.vi_tolerance)?;
    let behavior = make_behavior_policy(config.behavior_level, &q_star, &config.epsilons)?;
    let behavior_value = policy_evaluation_exact(&mdp, &behavior)?;
    let data_seed = derive_seed(config.master_seed, &[DATA_STREAM]);
    let data = collect_dataset(&mdp, &behavior, config.trajectories, data_seed)?.with_provenance(Provenance {
        level: Some(config.behavior_level),
        seed: data_seed,
    });
    let splits = (0..config.seeds)
        .map(|k| split_train_validation(&data, config.split_ratio, derive_seed(config.master_seed, &[SPLIT_STREAM, k as u64])))
        .collect::<Result<Vec<_>>>()?;

    let assignments: Vec<HyperparamAssignment> = config
        .algorithms
        .iter()
        .enumerate()
        .flat_map(|(i, alg)| {
            let grid = if alg == BC { &config.bc_grid } else { &config.cq_grid };
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.master_seed, &[HYPERPARAM_STREAM, i as u64]));
            grid.sample(alg, config.assignments, &mut rng)
        })
        .collect();

    let jobs: Vec<Job> = assignments
        .iter()
        .flat_map(|assignment| (0..config.seeds).map(move |seed| Job { assignment, seed }))
        .collect();
    let results = jobs
        .par_iter()
        .map(|job| {
            let (train_set, valid_set) = &splits[job.seed];
            let (policy, q) = train(job.assignment, train_set, gamma, config.fqe_iterations)?;
            Ok(JobResult {
                value: policy_evaluation_exact(&mdp, &policy)?,
                scores: [
                    fqe_score(&policy, valid_set, gamma, config.fqe_iterations)?,
                    td_error_score(&policy, &q, valid_set, gamma)?,
                    action_difference_score(&policy, valid_set)?,
                ],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut runs = Vec::with_capacity(jobs.len());
    let mut tables: Vec<ScoreTable> = (0..config.seeds)
        .map(|_| {
            let mut t = ScoreTable::new();
            for (method, direction) in METHODS {
                t.declare_method(method, direction);
            }
            t
        })
        .collect();
    for (job, result) in jobs.iter().zip(&results) {
        let a = job.assignment;
        runs.push(RunRecord {
            algorithm: a.algorithm.clone(),
            environment: config.environment.clone(),
            hyperparam_id: a.id.clone(),
            seed: job.seed as i64,
            value: result.value,
        });
        let policy_id = format!("{}:{}", a.algorithm, a.id);
        for (method, score) in [FQE, TD_ERROR, ACTION_DIFFERENCE].into_iter().zip(result.scores) {
            tables[job.seed]
                .insert(policy_id.clone(), method, score)
                .map_err(|e| TestbedError::Config(e.to_string()))?;
        }
    }
    let rounds = tables
        .into_iter()
        .enumerate()
        .map(|(k, table)| ScoreRound { round: k as i64, table })
        .collect();
    let values = aggregate_seeds(&runs, config.aggregation);
    Ok(PipelineOutput {
        runs,
        rounds,
        assignments,
        values,
        behavior_value,
    })
}
