//! Minimal differentiable core: dense layers, the GRU cell, optimizers and
//! checkpoints. Every layer has a hand-written backward pass; gradients
//! accumulate in each [`ParamTensor`]'s own buffer.

mod affine;
mod checkpoint;
mod gru;
mod optim;
mod tensor;

use thiserror::Error;

pub use affine::AffineSigmoid;
pub use checkpoint::{Checkpoint, TensorRecord, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use gru::{Gru, GruCache, GruInputGrads, GruState};
pub use optim::{Optimizer, OptimizerKind};
pub use tensor::{ParamTensor, Parameters};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{what}: dimension {found}, expected {expected}")]
    Dimension {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("backward called without a forward cache")]
    MissingCache,
    #[error("non-finite {what} in tensor `{tensor}` at index {index}")]
    NonFinite {
        tensor: String,
        index: usize,
        what: &'static str,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
