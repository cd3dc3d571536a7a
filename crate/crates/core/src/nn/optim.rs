use serde::{Deserialize, Serialize};

use super::{NnError, ParamTensor};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// First-order optimizer over a fixed, ordered list of tensors.
///
/// Adam uses beta1 = 0.9, beta2 = 0.999, eps = 1e-8 with bias correction.
/// Gradients are zeroed after every step.
#[derive(Debug, Clone)]
pub struct Optimizer<S> {
    kind: OptimizerKind,
    learning_rate: S,
    beta1: S,
    beta2: S,
    eps: S,
    steps: i32,
    moments: Vec<(Vec<S>, Vec<S>)>,
}

impl<S: Scalar> Optimizer<S> {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self {
            kind,
            learning_rate: S::of(learning_rate),
            beta1: S::of(0.9),
            beta2: S::of(0.999),
            eps: S::of(1e-8),
            steps: 0,
            moments: Vec::new(),
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self::new(OptimizerKind::Adam, learning_rate)
    }

    pub fn sgd(learning_rate: f64) -> Self {
        Self::new(OptimizerKind::Sgd, learning_rate)
    }

    pub fn steps(&self) -> i32 {
        self.steps
    }

    /// Applies one update. The tensor list must have the same order and
    /// shapes on every call.
    pub fn step(&mut self, tensors: &mut [&mut ParamTensor<S>]) -> Result<(), NnError> {
        for t in tensors.iter() {
            if let Some(i) = t.grad.iter().position(|g| !g.is_finite()) {
                return Err(NnError::NonFinite {
                    tensor: t.name.clone(),
                    index: i,
                    what: "gradient",
                });
            }
        }
        self.steps += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for t in tensors.iter_mut() {
                    let lr = self.learning_rate;
                    for (v, g) in t.value.iter_mut().zip(&t.grad) {
                        *v -= lr * *g;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.moments.is_empty() {
                    self.moments = tensors
                        .iter()
                        .map(|t| (vec![S::zero(); t.len()], vec![S::zero(); t.len()]))
                        .collect();
                }
                if self.moments.len() != tensors.len() {
                    return Err(NnError::Dimension {
                        what: "optimizer tensor list".into(),
                        expected: self.moments.len(),
                        found: tensors.len(),
                    });
                }
                let (b1, b2, one) = (self.beta1, self.beta2, S::one());
                let c1 = one - b1.powi(self.steps);
                let c2 = one - b2.powi(self.steps);
                for (t, (m, v)) in tensors.iter_mut().zip(self.moments.iter_mut()) {
                    for i in 0..t.value.len() {
                        let g = t.grad[i];
                        m[i] = b1 * m[i] + (one - b1) * g;
                        v[i] = b2 * v[i] + (one - b2) * g * g;
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        t.value[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
                    }
                }
            }
        }
        for t in tensors.iter_mut() {
            if let Some(i) = t.value.iter().position(|v| !v.is_finite()) {
                return Err(NnError::NonFinite {
                    tensor: t.name.clone(),
                    index: i,
                    what: "value",
                });
            }
            t.zero_grad();
        }
        Ok(())
    }
}
