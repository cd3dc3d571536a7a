use rand::Rng;

use crate::scalar::{axpy, dot, Scalar};

/// Named dense parameter with its gradient accumulator. Matrices are
/// row-major; vectors are stored as `rows x 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor<S> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub value: Vec<S>,
    pub grad: Vec<S>,
}

impl<S: Scalar> ParamTensor<S> {
    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self {
            name: name.into(),
            rows,
            cols,
            value: vec![S::zero(); rows * cols],
            grad: vec![S::zero(); rows * cols],
        }
    }

    /// Glorot-uniform initialization over `U(-a, a)`, `a = sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot<R: Rng>(name: impl Into<String>, rows: usize, cols: usize, rng: &mut R) -> Self {
        let mut t = Self::zeros(name, rows, cols);
        let a = (6.0 / (rows + cols) as f64).sqrt();
        for v in t.value.iter_mut() {
            *v = S::of(rng.gen_range(-a..a));
        }
        t
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.value[r * self.cols..(r + 1) * self.cols]
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = S::zero());
    }

    /// Restores the gradient buffer after deserialization.
    pub fn ensure_grad(&mut self) {
        if self.grad.len() != self.value.len() {
            self.grad = vec![S::zero(); self.value.len()];
        }
    }

    /// `out = self * x`
    pub fn matvec(&self, x: &[S], out: &mut [S]) {
        debug_assert_eq!(x.len(), self.cols);
        for (r, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(r), x);
        }
    }

    /// `out += self^T * v`
    pub fn matvec_t_acc(&self, v: &[S], out: &mut [S]) {
        debug_assert_eq!(v.len(), self.rows);
        for (r, &vr) in v.iter().enumerate() {
            if vr != S::zero() {
                axpy(vr, self.row(r), out);
            }
        }
    }

    /// `grad += a * x^T`
    pub fn outer_acc(&mut self, a: &[S], x: &[S]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        let cols = self.cols;
        for (r, &ar) in a.iter().enumerate() {
            if ar != S::zero() {
                axpy(ar, x, &mut self.grad[r * cols..(r + 1) * cols]);
            }
        }
    }

    /// `grad += a` for vector-shaped tensors.
    pub fn add_grad(&mut self, a: &[S]) {
        axpy(S::one(), a, &mut self.grad);
    }

    /// Adds another tensor's gradient into this one.
    pub fn merge_grad(&mut self, other: &Self) {
        axpy(S::one(), &other.grad, &mut self.grad);
    }
}

/// Anything that owns parameter tensors in a fixed order.
pub trait Parameters<S> {
    fn tensors(&self) -> Vec<&ParamTensor<S>>;
    fn tensors_mut(&mut self) -> Vec<&mut ParamTensor<S>>;

    fn zero_grad(&mut self)
    where
        S: Scalar,
    {
        for t in self.tensors_mut() {
            t.zero_grad();
        }
    }

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.value.len()).sum()
    }
}
