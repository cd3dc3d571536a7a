//! Training of the label agents and the distilled policy.
//!
//! Each agent maximizes a regularized REINFORCE objective whose per-step
//! return is
//!
//! ```text
//! R(u) = r_u + alpha * ln pi_d(a_u) - (alpha + beta) * ln pi(a_u)
//! G(t) = sum_{u >= t} gamma^(T - u) * R(u)
//! ```
//!
//! where `pi` is the policy the action was sampled from and the delayed
//! reward `r_u` is `±1` at `u = T` and zero before, together with a
//! binary cross-entropy loss on its classifier. The distilled policy is pulled
//! toward the agents' action probabilities. All gradient routines accumulate
//! the gradient of the *loss* (the negated objective), ready for a descent
//! step.

mod gradient;
mod hyper;
mod params;
mod train;

use thiserror::Error;

use crate::graph::GraphError;
use crate::nn::NnError;
use crate::walk::WalkError;

pub use gradient::{
    binary_cross_entropy, discounted_returns, distilled_policy_gradient, episode_kl,
    local_policy_gradient, probability_floor_hits, regularized_return, supervised_gradient,
    PROBABILITY_FLOOR,
};
pub use hyper::{HyperParams, Variant};
pub use params::{AgentParameters, LabelAgent, ModelDims};
pub use train::{train, train_with, write_training_log, EpochLog, TRAINING_LOG_HEADER};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperParams(String),
    #[error("episode from node {0} has no reward (unlabeled start node)")]
    NoReward(usize),
    #[error("empty episode batch")]
    EmptyBatch,
    #[error("step {0} must lie in 1..=T")]
    StepOutOfRange(usize),
    #[error("{0} requires distilled parameters")]
    MissingDistilled(&'static str),
    #[error("no gradient sink for {0}")]
    MissingSink(&'static str),
    #[error("distilled policy gradient is undefined for variant i")]
    IndependentVariant,
    #[error("incompatible parameters: {0}")]
    Incompatible(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}
