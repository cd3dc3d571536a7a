use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::LearnError;
use crate::nn::OptimizerKind;
use crate::walk::WalkPolicy;

/// How the distilled policy takes part in training and walking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Independent agents; no distilled policy.
    #[serde(rename = "i")]
    Independent,
    /// Distilled policy regularizes the objective; agents walk with their
    /// own policy.
    #[serde(rename = "reg")]
    Regularized,
    /// As `Regularized`, and agents walk with the renormalized product of
    /// their own and the distilled policy.
    #[serde(rename = "reg+")]
    RegularizedJoint,
}

impl Variant {
    pub fn uses_distilled(self) -> bool {
        self != Variant::Independent
    }

    pub fn walk_policy(self) -> WalkPolicy {
        match self {
            Variant::RegularizedJoint => WalkPolicy::Joint,
            _ => WalkPolicy::Local,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Independent => "i",
            Variant::Regularized => "reg",
            Variant::RegularizedJoint => "reg+",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "i" | "independent" => Ok(Variant::Independent),
            "reg" => Ok(Variant::Regularized),
            "reg+" | "regplus" | "reg_plus" => Ok(Variant::RegularizedJoint),
            other => Err(format!(
                "unknown variant `{other}` (expected i, reg or reg+)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Steps per walk (T).
    pub walk_length: usize,
    /// Walks per start node and agent (M).
    pub walks_per_node: usize,
    /// Discount in (0, 1].
    pub gamma: f64,
    /// Weight of the KL term toward the distilled policy.
    pub alpha: f64,
    /// Weight of the entropy term.
    pub beta: f64,
    pub learning_rate: f64,
    pub hidden_dim: usize,
    pub epochs: usize,
    /// Start nodes per parameter update.
    pub batch_size: usize,
    pub variant: Variant,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Subtract a moving average of the reward from returns.
    pub reward_baseline: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            walk_length: 10,
            walks_per_node: 3,
            gamma: 0.9,
            alpha: 1.0,
            beta: 0.1,
            learning_rate: 1e-2,
            hidden_dim: 128,
            epochs: 20,
            batch_size: 32,
            variant: Variant::Regularized,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            reward_baseline: false,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: String| Err(LearnError::InvalidHyperParams(m));
        if self.walk_length == 0 {
            return bad("walk_length must be >= 1".into());
        }
        if self.walks_per_node == 0 {
            return bad("walks_per_node must be >= 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return bad("alpha and beta must be non-negative".into());
        }
        if self.variant.uses_distilled() && self.alpha + self.beta <= 0.0 {
            return bad(format!("variant {} needs alpha + beta > 0", self.variant));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and >= 0".into());
        }
        if self.hidden_dim == 0 || self.batch_size == 0 {
            return bad("hidden_dim and batch_size must be >= 1".into());
        }
        Ok(())
    }
}
