//! Decision-based black-box adversarial attacks that search over
//! perturbation directions with Bayesian optimization.
//!
//! A low-dimensional point is turned into an image-sized perturbation by a
//! [generator](generators), normalized into a search direction, and scored
//! by the distance from the clean input to the decision boundary along that
//! direction ([`boundary::evaluate_distance`]), measured with hard-label
//! queries only. A Gaussian-process surrogate with Expected Improvement
//! ([`gp`], [`acquisition`]) picks the next direction to try
//! ([`engine::run_attack`]).

pub mod acquisition;
pub mod boundary;
pub mod domain;
pub mod engine;
pub mod error;
pub mod generators;
pub mod gp;
pub mod metrics;
pub mod oracles;
pub mod trace;

pub use domain::{
    counted_query, make_decision_rule, normalize_direction, AttackMode, AttackTask, Decision, DecisionRule,
    Direction, LowDimPoint, QueryCounter, Sample, Shape,
};
pub use engine::{run_attack, run_random_baseline, AttackError, AttackResult, BoConfig};
pub use error::{Error, Result};
