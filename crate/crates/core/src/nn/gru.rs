//! Gated recurrent unit over a concatenated `[x_v | c_n]` input.
//!
//! ```text
//! z  = sigmoid(W_z x + U_z h + b_z)
//! r  = sigmoid(W_r x + U_r h + b_r)
//! h~ = tanh(W_h x + r * (U_h h) + b_h)
//! h' = z * h~ + (1 - z) * h
//! ```

use rand::Rng;

use super::{NnError, ParamTensor, Parameters};
use crate::scalar::{sigmoid, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct Gru<S> {
    pub w_z: ParamTensor<S>,
    pub u_z: ParamTensor<S>,
    pub b_z: ParamTensor<S>,
    pub w_r: ParamTensor<S>,
    pub u_r: ParamTensor<S>,
    pub b_r: ParamTensor<S>,
    pub w_h: ParamTensor<S>,
    pub u_h: ParamTensor<S>,
    pub b_h: ParamTensor<S>,
}

/// Values saved by the forward pass for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCache<S> {
    pub input: Vec<S>,
    pub h_prev: Vec<S>,
    pub z: Vec<S>,
    pub r: Vec<S>,
    pub candidate: Vec<S>,
    /// `U_h h_prev`, before the reset gate is applied.
    pub uh: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruState<S> {
    pub h: Vec<S>,
    pub cache: Option<GruCache<S>>,
}

impl<S: Scalar> GruState<S> {
    /// The zero initial history.
    pub fn initial(hidden: usize) -> Self {
        Self {
            h: vec![S::zero(); hidden],
            cache: None,
        }
    }
}

/// Gradients with respect to the cell inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct GruInputGrads<S> {
    pub h_prev: Vec<S>,
    /// `dL/d[x_v | c_n]`, only when requested.
    pub input: Option<Vec<S>>,
}

impl<S: Scalar> Gru<S> {
    pub fn new<R: Rng>(name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let w =
            |n: &str, rng: &mut R| ParamTensor::glorot(format!("{name}.{n}"), hidden, input, rng);
        let u =
            |n: &str, rng: &mut R| ParamTensor::glorot(format!("{name}.{n}"), hidden, hidden, rng);
        let b = |n: &str| ParamTensor::zeros(format!("{name}.{n}"), hidden, 1);
        Self {
            w_z: w("w_z", rng),
            u_z: u("u_z", rng),
            b_z: b("b_z"),
            w_r: w("w_r", rng),
            u_r: u("u_r", rng),
            b_r: b("b_r"),
            w_h: w("w_h", rng),
            u_h: u("u_h", rng),
            b_h: b("b_h"),
        }
    }

    pub fn zeros(name: &str, input: usize, hidden: usize) -> Self {
        let w = |n: &str| ParamTensor::zeros(format!("{name}.{n}"), hidden, input);
        let u = |n: &str| ParamTensor::zeros(format!("{name}.{n}"), hidden, hidden);
        let b = |n: &str| ParamTensor::zeros(format!("{name}.{n}"), hidden, 1);
        Self {
            w_z: w("w_z"),
            u_z: u("u_z"),
            b_z: b("b_z"),
            w_r: w("w_r"),
            u_r: u("u_r"),
            b_r: b("b_r"),
            w_h: w("w_h"),
            u_h: u("u_h"),
            b_h: b("b_h"),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u_z.rows
    }

    /// Width of the concatenated input `[x_v | c_n]`.
    pub fn input(&self) -> usize {
        self.w_z.cols
    }

    pub fn forward(&self, h_prev: &[S], x_v: &[S], c_n: &[S]) -> Result<GruState<S>, NnError> {
        let d = self.hidden();
        let dim = |what: &str, expected: usize, found: usize| NnError::Dimension {
            what: format!("{} {what}", self.w_z.name),
            expected,
            found,
        };
        if h_prev.len() != d {
            return Err(dim("history", d, h_prev.len()));
        }
        if x_v.len() + c_n.len() != self.input() || x_v.len() != c_n.len() {
            return Err(dim("input", self.input(), x_v.len() + c_n.len()));
        }
        let mut input = Vec::with_capacity(self.input());
        input.extend_from_slice(x_v);
        input.extend_from_slice(c_n);

        let mut az = vec![S::zero(); d];
        let mut ar = vec![S::zero(); d];
        let mut ah = vec![S::zero(); d];
        let mut t = vec![S::zero(); d];
        self.w_z.matvec(&input, &mut az);
        self.u_z.matvec(h_prev, &mut t);
        let z: Vec<S> = (0..d)
            .map(|i| sigmoid(az[i] + t[i] + self.b_z.value[i]))
            .collect();
        self.w_r.matvec(&input, &mut ar);
        self.u_r.matvec(h_prev, &mut t);
        let r: Vec<S> = (0..d)
            .map(|i| sigmoid(ar[i] + t[i] + self.b_r.value[i]))
            .collect();
        self.w_h.matvec(&input, &mut ah);
        let mut uh = vec![S::zero(); d];
        self.u_h.matvec(h_prev, &mut uh);
        let candidate: Vec<S> = (0..d)
            .map(|i| (ah[i] + r[i] * uh[i] + self.b_h.value[i]).tanh())
            .collect();
        let h: Vec<S> = (0..d)
            .map(|i| z[i] * candidate[i] + (S::one() - z[i]) * h_prev[i])
            .collect();
        Ok(GruState {
            h,
            cache: Some(GruCache {
                input,
                h_prev: h_prev.to_vec(),
                z,
                r,
                candidate,
                uh,
            }),
        })
    }

    /// Accumulates parameter gradients for upstream `dh` and returns the
    /// gradient with respect to `h_prev` (and the input if `with_input`).
    pub fn backward(
        &mut self,
        state: &GruState<S>,
        dh: &[S],
        with_input: bool,
    ) -> Result<GruInputGrads<S>, NnError> {
        let c = state.cache.as_ref().ok_or(NnError::MissingCache)?;
        let d = self.hidden();
        if dh.len() != d {
            return Err(NnError::Dimension {
                what: format!("{} upstream gradient", self.w_z.name),
                expected: d,
                found: dh.len(),
            });
        }
        let one = S::one();
        let mut dh_prev: Vec<S> = (0..d).map(|i| dh[i] * (one - c.z[i])).collect();
        let da_h: Vec<S> = (0..d)
            .map(|i| dh[i] * c.z[i] * (one - c.candidate[i] * c.candidate[i]))
            .collect();
        let da_z: Vec<S> = (0..d)
            .map(|i| dh[i] * (c.candidate[i] - c.h_prev[i]) * c.z[i] * (one - c.z[i]))
            .collect();
        let da_r: Vec<S> = (0..d)
            .map(|i| da_h[i] * c.uh[i] * c.r[i] * (one - c.r[i]))
            .collect();
        let du: Vec<S> = (0..d).map(|i| da_h[i] * c.r[i]).collect();

        self.w_h.outer_acc(&da_h, &c.input);
        self.u_h.outer_acc(&du, &c.h_prev);
        self.b_h.add_grad(&da_h);
        self.w_r.outer_acc(&da_r, &c.input);
        self.u_r.outer_acc(&da_r, &c.h_prev);
        self.b_r.add_grad(&da_r);
        self.w_z.outer_acc(&da_z, &c.input);
        self.u_z.outer_acc(&da_z, &c.h_prev);
        self.b_z.add_grad(&da_z);

        self.u_h.matvec_t_acc(&du, &mut dh_prev);
        self.u_r.matvec_t_acc(&da_r, &mut dh_prev);
        self.u_z.matvec_t_acc(&da_z, &mut dh_prev);

        let input = with_input.then(|| {
            let mut dx = vec![S::zero(); self.input()];
            self.w_h.matvec_t_acc(&da_h, &mut dx);
            self.w_r.matvec_t_acc(&da_r, &mut dx);
            self.w_z.matvec_t_acc(&da_z, &mut dx);
            dx
        });
        Ok(GruInputGrads {
            h_prev: dh_prev,
            input,
        })
    }
}

impl<S> Parameters<S> for Gru<S> {
    fn tensors(&self) -> Vec<&ParamTensor<S>> {
        vec![
            &self.w_z, &self.u_z, &self.b_z, &self.w_r, &self.u_r, &self.b_r, &self.w_h, &self.u_h,
            &self.b_h,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut ParamTensor<S>> {
        vec![
            &mut self.w_z,
            &mut self.u_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.b_r,
            &mut self.w_h,
            &mut self.u_h,
            &mut self.b_h,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream;
    use proptest::prelude::*;

    #[test]
    fn zero_weights_halve_the_history() {
        let gru = Gru::<f64>::zeros("g", 6, 4);
        let h_prev = [0.4, -0.2, 0.9, 0.0];
        let s = gru
            .forward(&h_prev, &[1.0, 2.0, 3.0], &[-1.0, 0.5, 0.0])
            .unwrap();
        let c = s.cache.as_ref().unwrap();
        assert!(c.z.iter().all(|&z| z == 0.5));
        assert!(c.r.iter().all(|&r| r == 0.5));
        assert!(c.candidate.iter().all(|&h| h == 0.0));
        assert_eq!(s.h, vec![0.2, -0.1, 0.45, 0.0]);
        let zero = gru.forward(&[0.0; 4], &[1.0, 2.0, 3.0], &[1.0; 3]).unwrap();
        assert_eq!(zero.h, vec![0.0; 4]);
    }

    /// Scalar-by-scalar recomputation of the four gate equations.
    #[test]
    fn matches_elementwise_recomputation() {
        let mut rng = stream(42, &[]);
        let gru = Gru::<f64>::new("g", 6, 4, &mut rng);
        let h_prev = [0.3, -0.5, 0.1, 0.8];
        let xv = [0.2, -0.1, 0.4];
        let cn = [1.0, 0.0, -0.6];
        let x: Vec<f64> = xv.iter().chain(&cn).copied().collect();
        let s = gru.forward(&h_prev, &xv, &cn).unwrap();
        let sig = |a: f64| 1.0 / (1.0 + (-a).exp());
        for i in 0..4 {
            let mut az = gru.b_z.value[i];
            let mut ar = gru.b_r.value[i];
            let mut ah = gru.b_h.value[i];
            let mut uh = 0.0;
            for j in 0..6 {
                az += gru.w_z.value[i * 6 + j] * x[j];
                ar += gru.w_r.value[i * 6 + j] * x[j];
                ah += gru.w_h.value[i * 6 + j] * x[j];
            }
            for j in 0..4 {
                az += gru.u_z.value[i * 4 + j] * h_prev[j];
                ar += gru.u_r.value[i * 4 + j] * h_prev[j];
                uh += gru.u_h.value[i * 4 + j] * h_prev[j];
            }
            let z = sig(az);
            let r = sig(ar);
            let cand = (ah + r * uh).tanh();
            let h = z * cand + (1.0 - z) * h_prev[i];
            assert!((h - s.h[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = stream(3, &[]);
        let mut gru = Gru::<f64>::new("g", 4, 3, &mut rng);
        let s = gru
            .forward(&[0.1, 0.2, 0.3], &[1.0, 0.0], &[0.5, 0.5])
            .unwrap();
        let g = gru.backward(&s, &[0.0; 3], true).unwrap();
        assert!(g.h_prev.iter().all(|&v| v == 0.0));
        assert!(g.input.unwrap().iter().all(|&v| v == 0.0));
        assert!(gru
            .tensors()
            .iter()
            .all(|t| t.grad.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn missing_cache_is_an_error() {
        let mut gru = Gru::<f64>::zeros("g", 2, 2);
        assert!(matches!(
            gru.backward(&GruState::initial(2), &[1.0, 1.0], false),
            Err(NnError::MissingCache)
        ));
    }

    #[test]
    fn forward_is_bit_reproducible() {
        let mut rng = stream(9, &[]);
        let gru = Gru::<f64>::new("g", 4, 3, &mut rng);
        let a = gru
            .forward(&[0.1, -0.2, 0.3], &[1.0, 0.5], &[0.5, -0.5])
            .unwrap();
        let b = gru
            .forward(&[0.1, -0.2, 0.3], &[1.0, 0.5], &[0.5, -0.5])
            .unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn output_stays_in_open_unit_box(
            seed in any::<u64>(),
            h in prop::collection::vec(-0.999f64..0.999, 4),
            x in prop::collection::vec(-3.0f64..3.0, 6),
        ) {
            let mut rng = stream(seed, &[]);
            let gru = Gru::<f64>::new("g", 6, 4, &mut rng);
            let s = gru.forward(&h, &x[..3], &x[3..]).unwrap();
            let c = s.cache.unwrap();
            for i in 0..4 {
                prop_assert!(s.h[i] > -1.0 && s.h[i] < 1.0);
                prop_assert!(c.z[i] > 0.0 && c.z[i] < 1.0);
                prop_assert!(c.r[i] > 0.0 && c.r[i] < 1.0);
            }
        }
    }
}
