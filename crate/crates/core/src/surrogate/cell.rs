//! A single LSTM layer and its one-step update.
//!
//! Gate naming follows the formulation used throughout this crate: `i`
//! carries the *candidate* values and goes through the state activation,
//! while `j` is the input gate and goes through the gate activation.
//!
//! ```text
//! f = σ(W_xf·x + W_hf·h + b_f)
//! i = s(W_xi·x + W_hi·h + b_i)
//! j = σ(W_xj·x + W_hj·h + b_j)
//! o = σ(W_xo·x + W_ho·h + b_o)
//! c' = c ⊙ f + i ⊙ j
//! h' = s(c') ⊙ o
//! ```
//!
//! with σ the logistic sigmoid and s the softsign.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tensor::Matrix;
use super::SurrogateError;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub fn softsign(x: f64) -> f64 {
    x / (1.0 + x.abs())
}

/// d/dx softsign(x)
#[inline]
pub fn softsign_grad(x: f64) -> f64 {
    let d = 1.0 + x.abs();
    1.0 / (d * d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayerParams {
    pub w_xf: Matrix,
    pub w_xi: Matrix,
    pub w_xj: Matrix,
    pub w_xo: Matrix,
    pub w_hf: Matrix,
    pub w_hi: Matrix,
    pub w_hj: Matrix,
    pub w_ho: Matrix,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_j: Vec<f64>,
    pub b_o: Vec<f64>,
}

/// Gate activations and pre-activations of one step, kept for BPTT.
#[derive(Debug, Clone, Default)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub f: Vec<f64>,
    pub i_pre: Vec<f64>,
    pub i: Vec<f64>,
    pub j: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmLayerParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let wx = || Matrix::zeros(hidden_size, input_size);
        let wh = || Matrix::zeros(hidden_size, hidden_size);
        let b = || vec![0.0; hidden_size];
        Self {
            w_xf: wx(),
            w_xi: wx(),
            w_xj: wx(),
            w_xo: wx(),
            w_hf: wh(),
            w_hi: wh(),
            w_hj: wh(),
            w_ho: wh(),
            b_f: b(),
            b_i: b(),
            b_j: b(),
            b_o: b(),
        }
    }

    /// HE initialisation: weights ~ N(0, 2 / fan_in), biases zero.
    pub fn he_init<R: Rng + ?Sized>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_size, hidden_size);
        let nx = Normal::new(0.0, (2.0 / input_size as f64).sqrt()).expect("finite std");
        let nh = Normal::new(0.0, (2.0 / hidden_size as f64).sqrt()).expect("finite std");
        for m in [&mut p.w_xf, &mut p.w_xi, &mut p.w_xj, &mut p.w_xo] {
            m.data.iter_mut().for_each(|w| *w = nx.sample(rng));
        }
        for m in [&mut p.w_hf, &mut p.w_hi, &mut p.w_hj, &mut p.w_ho] {
            m.data.iter_mut().for_each(|w| *w = nh.sample(rng));
        }
        p
    }

    pub fn input_size(&self) -> usize {
        self.w_xf.cols
    }

    pub fn hidden_size(&self) -> usize {
        self.w_xf.rows
    }

    pub fn validate(&self) -> Result<(), SurrogateError> {
        let (h, n) = (self.hidden_size(), self.input_size());
        let bad = |what: &str| {
            Err(SurrogateError::Shape(format!(
                "{what}: expected consistent {h}x{n} layer"
            )))
        };
        for m in [&self.w_xf, &self.w_xi, &self.w_xj, &self.w_xo] {
            if m.rows != h || m.cols != n || m.data.len() != h * n {
                return bad("input weights");
            }
        }
        for m in [&self.w_hf, &self.w_hi, &self.w_hj, &self.w_ho] {
            if m.rows != h || m.cols != h || m.data.len() != h * h {
                return bad("recurrent weights");
            }
        }
        for b in [&self.b_f, &self.b_i, &self.b_j, &self.b_o] {
            if b.len() != h {
                return bad("biases");
            }
        }
        Ok(())
    }

    /// All tensors in a fixed order; the flag marks weight matrices.
    pub fn tensors(&self) -> [(&[f64], bool); 12] {
        [
            (&self.w_xf.data, true),
            (&self.w_xi.data, true),
            (&self.w_xj.data, true),
            (&self.w_xo.data, true),
            (&self.w_hf.data, true),
            (&self.w_hi.data, true),
            (&self.w_hj.data, true),
            (&self.w_ho.data, true),
            (&self.b_f, false),
            (&self.b_i, false),
            (&self.b_j, false),
            (&self.b_o, false),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 12] {
        [
            &mut self.w_xf.data,
            &mut self.w_xi.data,
            &mut self.w_xj.data,
            &mut self.w_xo.data,
            &mut self.w_hf.data,
            &mut self.w_hi.data,
            &mut self.w_hj.data,
            &mut self.w_ho.data,
            &mut self.b_f,
            &mut self.b_i,
            &mut self.b_j,
            &mut self.b_o,
        ]
    }

    /// Pre-activations of the four gates.
    fn preactivations(&self, x: &[f64], h_prev: &[f64]) -> [Vec<f64>; 4] {
        let mut f = self.b_f.clone();
        let mut i = self.b_i.clone();
        let mut j = self.b_j.clone();
        let mut o = self.b_o.clone();
        self.w_xf.mul_vec_acc(x, &mut f);
        self.w_hf.mul_vec_acc(h_prev, &mut f);
        self.w_xi.mul_vec_acc(x, &mut i);
        self.w_hi.mul_vec_acc(h_prev, &mut i);
        self.w_xj.mul_vec_acc(x, &mut j);
        self.w_hj.mul_vec_acc(h_prev, &mut j);
        self.w_xo.mul_vec_acc(x, &mut o);
        self.w_ho.mul_vec_acc(h_prev, &mut o);
        [f, i, j, o]
    }

    /// One step, retaining everything BPTT needs.
    pub fn step_cached(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
        let [mut f, i_pre, mut j, mut o] = self.preactivations(x, h_prev);
        f.iter_mut().for_each(|v| *v = sigmoid(*v));
        j.iter_mut().for_each(|v| *v = sigmoid(*v));
        o.iter_mut().for_each(|v| *v = sigmoid(*v));
        let i: Vec<f64> = i_pre.iter().map(|&v| softsign(v)).collect();
        let c: Vec<f64> = (0..f.len())
            .map(|k| c_prev[k] * f[k] + i[k] * j[k])
            .collect();
        let h: Vec<f64> = c.iter().zip(&o).map(|(&c, &o)| softsign(c) * o).collect();
        StepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            f,
            i_pre,
            i,
            j,
            o,
            c,
            h,
        }
    }
}

/// One LSTM step: returns the new hidden and cell states.
pub fn cell_step(
    params: &LstmLayerParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), SurrogateError> {
    params.validate()?;
    let (n, h) = (params.input_size(), params.hidden_size());
    if x.len() != n || h_prev.len() != h || c_prev.len() != h {
        return Err(SurrogateError::DimensionMismatch(format!(
            "cell expects x[{n}], h[{h}], c[{h}]; got x[{}], h[{}], c[{}]",
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let step = params.step_cached(x, h_prev, c_prev);
    Ok((step.h, step.c))
}
