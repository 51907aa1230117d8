//! Tabular offline RL testbed: a known MDP, behavior policies of graded
//! expertise, logged datasets, two offline learners, exact online values and
//! three offline policy-selection scores.

pub mod dataset;
pub mod mdp;
pub mod pipeline;
pub mod planning;
pub mod policy;
pub mod scoring;
pub mod train;

pub use dataset::{collect_dataset, collect_trajectories, split_train_validation, Dataset, Transition, TrajectoryCount};
pub use mdp::{default_gridworld, deterministic_gridworld, GridworldSpec, QTable, TabularMdp};
pub use pipeline::{run_pipeline, MdpChoice, PipelineConfig, PipelineOutput};
pub use planning::{occupancy, policy_evaluation_exact, value_iteration};
pub use policy::{make_behavior_policy, BehaviorEpsilons, BehaviorLevel, TabularPolicy};
pub use scoring::{action_difference_score, fqe_q, fqe_score, td_error_score};
pub use train::{train_bc, train_conservative_q, BcParams, CqParams, HyperparamAssignment, HyperparamGrid};

#[derive(Debug, thiserror::Error)]
pub enum TestbedError {
    #[error("invalid mdp: {0}")]
    InvalidMdp(String),
    #[error("mdp fixture line {line}: {message}")]
    Fixture { line: usize, message: String },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("epsilons must lie in [0, 1] and strictly decrease from low to high, got ({0}, {1}, {2})")]
    NonMonotoneEpsilons(f64, f64, f64),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("singular evaluation system")]
    SingularSystem,
    #[error("trajectory count must be 99, 999 or 9999, got {0}")]
    TrajectoryCount(usize),
    #[error("split ratio must lie in (0, 1), got {0}")]
    SplitRatio(f64),
    #[error("need at least 2 trajectories to split, got {0}")]
    TooFewTrajectories(usize),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("empty validation set")]
    EmptyValidation,
    #[error("dataset and policy shapes differ")]
    ShapeMismatch,
    #[error("hyperparameter `{name}`: {message}")]
    Hyperparam { name: String, message: String },
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, TestbedError>;
