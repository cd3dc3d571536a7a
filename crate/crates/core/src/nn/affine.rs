//! Single-layer affine map followed by a logistic sigmoid.

use rand::Rng;

use super::{NnError, ParamTensor, Parameters};
use crate::scalar::{axpy, dot, sigmoid, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct AffineSigmoid<S> {
    pub weight: ParamTensor<S>,
    pub bias: ParamTensor<S>,
}

impl<S: Scalar> AffineSigmoid<S> {
    pub fn new<R: Rng>(name: &str, inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Self {
            weight: ParamTensor::glorot(format!("{name}.weight"), outputs, inputs, rng),
            bias: ParamTensor::zeros(format!("{name}.bias"), outputs, 1),
        }
    }

    pub fn zeros(name: &str, inputs: usize, outputs: usize) -> Self {
        Self {
            weight: ParamTensor::zeros(format!("{name}.weight"), outputs, inputs),
            bias: ParamTensor::zeros(format!("{name}.bias"), outputs, 1),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows
    }

    fn check(&self, parts: &[&[S]]) -> Result<(), NnError> {
        let n: usize = parts.iter().map(|p| p.len()).sum();
        if n != self.inputs() {
            return Err(NnError::Dimension {
                what: self.weight.name.clone(),
                expected: self.inputs(),
                found: n,
            });
        }
        Ok(())
    }

    /// Pre-activation of output `o` for an input given as concatenated parts.
    #[inline]
    fn logit(&self, o: usize, parts: &[&[S]]) -> S {
        let row = self.weight.row(o);
        let mut acc = self.bias.value[o];
        let mut at = 0;
        for p in parts {
            acc += dot(&row[at..at + p.len()], p);
            at += p.len();
        }
        acc
    }

    /// `sigmoid(W [p_1 | p_2 | ...] + b)`, one value per output unit.
    pub fn forward_parts(&self, parts: &[&[S]]) -> Result<Vec<S>, NnError> {
        self.check(parts)?;
        Ok((0..self.outputs())
            .map(|o| sigmoid(self.logit(o, parts)))
            .collect())
    }

    pub fn forward(&self, x: &[S]) -> Result<Vec<S>, NnError> {
        self.forward_parts(&[x])
    }

    /// Single-output convenience used by the score and classifier nets.
    pub fn forward_scalar(&self, parts: &[&[S]]) -> Result<S, NnError> {
        self.check(parts)?;
        Ok(sigmoid(self.logit(0, parts)))
    }

    /// Accumulates parameter gradients given `dL/dlogit` per output unit.
    pub fn backward_logits(&mut self, parts: &[&[S]], dlogit: &[S]) {
        let cols = self.weight.cols;
        for (o, &g) in dlogit.iter().enumerate() {
            if g == S::zero() {
                continue;
            }
            self.bias.grad[o] += g;
            let row = &mut self.weight.grad[o * cols..(o + 1) * cols];
            let mut at = 0;
            for p in parts {
                axpy(g, p, &mut row[at..at + p.len()]);
                at += p.len();
            }
        }
    }

    /// Adds `W[:, range]^T dlogit` to `out`: the input gradient for the part
    /// that starts at column `offset`.
    pub fn input_grad_acc(&self, dlogit: &[S], offset: usize, out: &mut [S]) {
        for (o, &g) in dlogit.iter().enumerate() {
            if g != S::zero() {
                axpy(g, &self.weight.row(o)[offset..offset + out.len()], out);
            }
        }
    }

    /// Full backward from `dL/dy` at the sigmoid output: accumulates parameter
    /// gradients and returns `dL/dx`.
    pub fn backward(&mut self, x: &[S], y: &[S], dy: &[S]) -> Vec<S> {
        let dlogit: Vec<S> = y
            .iter()
            .zip(dy)
            .map(|(&y, &g)| g * y * (S::one() - y))
            .collect();
        self.backward_logits(&[x], &dlogit);
        let mut dx = vec![S::zero(); x.len()];
        self.input_grad_acc(&dlogit, 0, &mut dx);
        dx
    }
}

impl<S> Parameters<S> for AffineSigmoid<S> {
    fn tensors(&self) -> Vec<&ParamTensor<S>> {
        vec![&self.weight, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut ParamTensor<S>> {
        vec![&mut self.weight, &mut self.bias]
    }
}
