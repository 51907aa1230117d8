//! Budget-aware reporting for offline RL hyperparameter searches.
//!
//! The central quantity is the expected best online value a practitioner
//! obtains when only `b` of the `N` trained policies can be deployed. The
//! [`estimator`] module computes it, [`metrics`] and [`selection`] measure
//! how well offline policy selection spends the budget, and [`io`] and
//! [`report`] handle files and tables.

pub mod estimator;
pub mod io;
pub mod metrics;
pub mod report;
pub mod rng;
pub mod selection;

pub use estimator::{
    eop_plugin, eop_vanilla_average, eop_without_replacement, expected_max_bruteforce,
    expected_max_montecarlo, EopCurve, EopPoint, EstimatorError, SelectionRound, ValueSample,
};
pub use metrics::{
    inverse_normalized_regret_at_k, normalize_best_behavioral, regret_curve, spearman_rho,
    MetricError, RankedList, ValueMap,
};
pub use selection::{
    rank_policies, simulate_selection_rounds, simulate_uniform_rounds, uniform_regret_eop,
    Direction, Replacement, ScoreTable, SelectionError, SelectionStrategy,
};
