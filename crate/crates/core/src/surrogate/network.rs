//! Stacked LSTM with a dense reLU head, run in closed loop: each day's
//! prediction is fed back as the next day's previous-output input.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::cell::{sigmoid, softsign, softsign_grad, LstmLayerParams, StepCache};
use super::tensor::Matrix;
use super::SurrogateError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<LstmLayerParams>,
    pub out_w: Matrix,
    pub out_b: Vec<f64>,
}

/// Forward trace of one sequence.
#[derive(Debug, Clone)]
pub struct SeqCache {
    /// `steps[t][l]`
    pub steps: Vec<Vec<StepCache>>,
    pub z: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    /// Whether the fed-back outputs came from outside (teacher forcing), in
    /// which case no gradient flows through them.
    pub forced: bool,
}

impl Network {
    pub fn zeros(input_size: usize, hidden_size: usize, n_layers: usize, n_out: usize) -> Self {
        let layers = (0..n_layers)
            .map(|l| {
                LstmLayerParams::zeros(if l == 0 { input_size } else { hidden_size }, hidden_size)
            })
            .collect();
        Self {
            layers,
            out_w: Matrix::zeros(n_out, hidden_size),
            out_b: vec![0.0; n_out],
        }
    }

    pub fn he_init<R: Rng + ?Sized>(
        input_size: usize,
        hidden_size: usize,
        n_layers: usize,
        n_out: usize,
        rng: &mut R,
    ) -> Self {
        let layers = (0..n_layers)
            .map(|l| {
                LstmLayerParams::he_init(
                    if l == 0 { input_size } else { hidden_size },
                    hidden_size,
                    rng,
                )
            })
            .collect();
        let dist = Normal::new(0.0, (2.0 / hidden_size as f64).sqrt()).expect("finite std");
        let out_w = Matrix::from_fn(n_out, hidden_size, |_, _| dist.sample(rng));
        Self {
            layers,
            out_w,
            out_b: vec![0.0; n_out],
        }
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size()
    }

    pub fn hidden_size(&self) -> usize {
        self.out_w.cols
    }

    pub fn n_out(&self) -> usize {
        self.out_w.rows
    }

    /// Width of the per-day plan input (input size minus fed-back outputs).
    pub fn plan_width(&self) -> usize {
        self.input_size() - self.n_out()
    }

    pub fn validate(&self) -> Result<(), SurrogateError> {
        if self.layers.is_empty() {
            return Err(SurrogateError::Shape(
                "network has no recurrent layers".into(),
            ));
        }
        let hidden = self.layers[0].hidden_size();
        for (l, layer) in self.layers.iter().enumerate() {
            layer.validate()?;
            if layer.hidden_size() != hidden || (l > 0 && layer.input_size() != hidden) {
                return Err(SurrogateError::Shape(format!(
                    "layer {l} does not stack on its predecessor"
                )));
            }
        }
        if self.out_w.cols != hidden
            || self.out_w.data.len() != self.out_w.rows * self.out_w.cols
            || self.out_b.len() != self.out_w.rows
        {
            return Err(SurrogateError::Shape("output layer shape".into()));
        }
        if self.input_size() <= self.n_out() {
            return Err(SurrogateError::Shape(
                "input must hold plan values plus fed-back outputs".into(),
            ));
        }
        Ok(())
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    /// Every parameter tensor with a flag marking weight matrices (the
    /// tensors subject to L2).
    pub fn tensors(&self) -> Vec<(&[f64], bool)> {
        let mut out: Vec<(&[f64], bool)> = self.layers.iter().flat_map(|l| l.tensors()).collect();
        out.push((&self.out_w.data, true));
        out.push((&self.out_b, false));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = self
            .layers
            .iter_mut()
            .flat_map(|l| l.tensors_mut())
            .collect();
        out.push(&mut self.out_w.data);
        out.push(&mut self.out_b);
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(t, _)| t.len()).sum()
    }

    fn check_sequence(&self, plans: &[f64], y0: &[f64]) -> Result<usize, SurrogateError> {
        let p = self.plan_width();
        if y0.len() != self.n_out() || plans.is_empty() || !plans.len().is_multiple_of(p) {
            return Err(SurrogateError::DimensionMismatch(format!(
                "sequence needs k·{p} plan values and {} initial outputs; got {} and {}",
                self.n_out(),
                plans.len(),
                y0.len()
            )));
        }
        Ok(plans.len() / p)
    }

    /// Closed-loop forward pass keeping the full trace.
    ///
    /// `plans` is the flattened `T × plan_width` normalised plan, `y0` the
    /// normalised previous-day outputs for day 1.
    pub fn forward_cached(&self, plans: &[f64], y0: &[f64]) -> Result<SeqCache, SurrogateError> {
        self.forward_cached_with(plans, y0, None)
    }

    /// Like [`Network::forward_cached`], but with `feedback` given the input
    /// of day `t + 1` uses `feedback[t]` instead of the day-`t` prediction.
    pub fn forward_cached_with(
        &self,
        plans: &[f64],
        y0: &[f64],
        feedback: Option<&[Vec<f64>]>,
    ) -> Result<SeqCache, SurrogateError> {
        let days = self.check_sequence(plans, y0)?;
        if let Some(fb) = feedback {
            if fb.len() + 1 < days || fb.iter().any(|y| y.len() != self.n_out()) {
                return Err(SurrogateError::DimensionMismatch(format!(
                    "feedback needs {} rows of {} outputs",
                    days.saturating_sub(1),
                    self.n_out()
                )));
            }
        }
        let p = self.plan_width();
        let hidden = self.hidden_size();
        let n_layers = self.layers.len();
        let mut h = vec![vec![0.0; hidden]; n_layers];
        let mut c = vec![vec![0.0; hidden]; n_layers];
        let mut y_prev = y0.to_vec();
        let mut cache = SeqCache {
            steps: Vec::with_capacity(days),
            z: Vec::with_capacity(days),
            y: Vec::with_capacity(days),
            forced: feedback.is_some(),
        };
        for t in 0..days {
            let mut input: Vec<f64> = plans[t * p..(t + 1) * p].to_vec();
            input.extend_from_slice(&y_prev);
            let mut steps = Vec::with_capacity(n_layers);
            for l in 0..n_layers {
                let step = self.layers[l].step_cached(&input, &h[l], &c[l]);
                h[l].clone_from(&step.h);
                c[l].clone_from(&step.c);
                input.clone_from(&step.h);
                steps.push(step);
            }
            let mut z = self.out_b.clone();
            self.out_w.mul_vec_acc(&h[n_layers - 1], &mut z);
            let y: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
            match feedback {
                Some(fb) if t < fb.len() => y_prev.clone_from(&fb[t]),
                _ => y_prev.clone_from(&y),
            }
            cache.steps.push(steps);
            cache.z.push(z);
            cache.y.push(y);
        }
        Ok(cache)
    }

    /// Closed-loop prediction of every day, `T × n_out`.
    pub fn predict(&self, plans: &[f64], y0: &[f64]) -> Result<Vec<Vec<f64>>, SurrogateError> {
        let days = self.check_sequence(plans, y0)?;
        let mut scratch = Scratch::new(self);
        let mut out = Vec::with_capacity(days);
        scratch.run(self, plans, y0, |y| out.push(y.to_vec()));
        Ok(out)
    }

    /// Prediction of the last day only.
    pub fn predict_last(&self, plans: &[f64], y0: &[f64]) -> Result<Vec<f64>, SurrogateError> {
        self.check_sequence(plans, y0)?;
        let mut scratch = Scratch::new(self);
        let mut last = Vec::new();
        scratch.run(self, plans, y0, |y| {
            last.clear();
            last.extend_from_slice(y)
        });
        Ok(last)
    }

    /// Gradient of a loss with respect to every parameter, given the trace
    /// and `dloss/dy` for each day. Gradients through the fed-back outputs
    /// are included.
    pub fn backward(&self, cache: &SeqCache, dy: &[Vec<f64>]) -> Network {
        let mut grad = self.zeros_like();
        let days = cache.y.len();
        let n_layers = self.layers.len();
        let hidden = self.hidden_size();
        let p = self.plan_width();
        let mut dh_next = vec![vec![0.0; hidden]; n_layers];
        let mut dc_next = vec![vec![0.0; hidden]; n_layers];
        // gradient w.r.t. y_t arriving from day t+1's input
        let mut dy_feed = vec![0.0; self.n_out()];

        for t in (0..days).rev() {
            let dz: Vec<f64> = (0..self.n_out())
                .map(|k| {
                    let g = dy[t][k] + dy_feed[k];
                    if cache.z[t][k] > 0.0 {
                        g
                    } else {
                        0.0
                    }
                })
                .collect();
            let top = &cache.steps[t][n_layers - 1];
            grad.out_w.add_outer(&dz, &top.h);
            grad.out_b.iter_mut().zip(&dz).for_each(|(g, d)| *g += d);
            let mut dh_above = vec![0.0; hidden];
            self.out_w.tr_mul_vec_acc(&dz, &mut dh_above);

            for l in (0..n_layers).rev() {
                let s = &cache.steps[t][l];
                let w = &self.layers[l];
                let g = &mut grad.layers[l];
                let n = hidden;
                let mut da_f = vec![0.0; n];
                let mut da_i = vec![0.0; n];
                let mut da_j = vec![0.0; n];
                let mut da_o = vec![0.0; n];
                let mut dc_prev = vec![0.0; n];
                for k in 0..n {
                    let dh = dh_above[k] + dh_next[l][k];
                    let sc = softsign(s.c[k]);
                    let d_o = dh * sc;
                    let dc = dh * s.o[k] * softsign_grad(s.c[k]) + dc_next[l][k];
                    let d_f = dc * s.c_prev[k];
                    dc_prev[k] = dc * s.f[k];
                    let d_i = dc * s.j[k];
                    let d_j = dc * s.i[k];
                    da_f[k] = d_f * s.f[k] * (1.0 - s.f[k]);
                    da_i[k] = d_i * softsign_grad(s.i_pre[k]);
                    da_j[k] = d_j * s.j[k] * (1.0 - s.j[k]);
                    da_o[k] = d_o * s.o[k] * (1.0 - s.o[k]);
                }
                for (gm, da) in [
                    (&mut g.w_xf, &da_f),
                    (&mut g.w_xi, &da_i),
                    (&mut g.w_xj, &da_j),
                    (&mut g.w_xo, &da_o),
                ] {
                    gm.add_outer(da, &s.x);
                }
                for (gm, da) in [
                    (&mut g.w_hf, &da_f),
                    (&mut g.w_hi, &da_i),
                    (&mut g.w_hj, &da_j),
                    (&mut g.w_ho, &da_o),
                ] {
                    gm.add_outer(da, &s.h_prev);
                }
                for (gb, da) in [
                    (&mut g.b_f, &da_f),
                    (&mut g.b_i, &da_i),
                    (&mut g.b_j, &da_j),
                    (&mut g.b_o, &da_o),
                ] {
                    gb.iter_mut().zip(da.iter()).for_each(|(a, b)| *a += b);
                }
                let mut dx = vec![0.0; w.input_size()];
                let mut dh_prev = vec![0.0; n];
                for (wx, wh, da) in [
                    (&w.w_xf, &w.w_hf, &da_f),
                    (&w.w_xi, &w.w_hi, &da_i),
                    (&w.w_xj, &w.w_hj, &da_j),
                    (&w.w_xo, &w.w_ho, &da_o),
                ] {
                    wx.tr_mul_vec_acc(da, &mut dx);
                    wh.tr_mul_vec_acc(da, &mut dh_prev);
                }
                dh_next[l] = dh_prev;
                dc_next[l] = dc_prev;
                if l > 0 {
                    dh_above = dx;
                } else if !cache.forced {
                    dy_feed.copy_from_slice(&dx[p..]);
                }
            }
        }
        grad
    }
}

/// Preallocated buffers for allocation-free inference.
struct Scratch {
    h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    input: Vec<f64>,
    gates: [Vec<f64>; 4],
    y: Vec<f64>,
}

impl Scratch {
    fn new(net: &Network) -> Self {
        let hidden = net.hidden_size();
        let n_layers = net.layers.len();
        Self {
            h: vec![vec![0.0; hidden]; n_layers],
            c: vec![vec![0.0; hidden]; n_layers],
            input: Vec::with_capacity(net.input_size().max(hidden)),
            gates: std::array::from_fn(|_| vec![0.0; hidden]),
            y: vec![0.0; net.n_out()],
        }
    }

    fn run(&mut self, net: &Network, plans: &[f64], y0: &[f64], mut emit: impl FnMut(&[f64])) {
        let p = net.plan_width();
        let days = plans.len() / p;
        self.y.copy_from_slice(y0);
        for t in 0..days {
            self.input.clear();
            self.input.extend_from_slice(&plans[t * p..(t + 1) * p]);
            self.input.extend_from_slice(&self.y);
            for (l, layer) in net.layers.iter().enumerate() {
                let [f, i, j, o] = &mut self.gates;
                f.copy_from_slice(&layer.b_f);
                i.copy_from_slice(&layer.b_i);
                j.copy_from_slice(&layer.b_j);
                o.copy_from_slice(&layer.b_o);
                layer.w_xf.mul_vec_acc(&self.input, f);
                layer.w_hf.mul_vec_acc(&self.h[l], f);
                layer.w_xi.mul_vec_acc(&self.input, i);
                layer.w_hi.mul_vec_acc(&self.h[l], i);
                layer.w_xj.mul_vec_acc(&self.input, j);
                layer.w_hj.mul_vec_acc(&self.h[l], j);
                layer.w_xo.mul_vec_acc(&self.input, o);
                layer.w_ho.mul_vec_acc(&self.h[l], o);
                let (h, c) = (&mut self.h[l], &mut self.c[l]);
                for k in 0..h.len() {
                    c[k] = c[k] * sigmoid(f[k]) + softsign(i[k]) * sigmoid(j[k]);
                    h[k] = softsign(c[k]) * sigmoid(o[k]);
                }
                self.input.clear();
                self.input.extend_from_slice(h);
            }
            self.y.copy_from_slice(&net.out_b);
            net.out_w.mul_vec_acc(&self.input, &mut self.y);
            self.y.iter_mut().for_each(|v| *v = v.max(0.0));
            emit(&self.y);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cached_and_lean_forward_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Network::he_init(10, 6, 3, 3, &mut rng);
        let plans: Vec<f64> = (0..7 * 5).map(|_| rng.random_range(0.0..1.0)).collect();
        let y0 = [0.2, 0.4, 0.9];
        let cache = net.forward_cached(&plans, &y0).unwrap();
        let lean = net.predict(&plans, &y0).unwrap();
        assert_eq!(cache.y, lean);
        assert_eq!(net.predict_last(&plans, &y0).unwrap(), lean[4]);
    }

    #[test]
    fn hidden_and_gate_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Network::he_init(10, 10, 3, 3, &mut rng);
        let plans: Vec<f64> = (0..7 * 7).map(|_| rng.random_range(-3.0..3.0)).collect();
        let cache = net.forward_cached(&plans, &[0.5, 0.5, 0.5]).unwrap();
        for day in &cache.steps {
            for s in day {
                for v in s.f.iter().chain(&s.j).chain(&s.o) {
                    assert!(*v > 0.0 && *v < 1.0);
                }
                for v in s.i.iter().chain(&s.h) {
                    assert!(v.abs() < 1.0);
                }
                assert!(s.c.iter().all(|c| c.is_finite()));
            }
        }
    }

    #[test]
    fn stacking_feeds_hidden_state_upwards() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Network::he_init(10, 4, 3, 3, &mut rng);
        let plans: Vec<f64> = (0..14).map(|_| rng.random_range(0.0..1.0)).collect();
        let cache = net.forward_cached(&plans, &[0.1, 0.2, 0.3]).unwrap();
        for day in &cache.steps {
            assert_eq!(day[1].x, day[0].h);
            assert_eq!(day[2].x, day[1].h);
        }
        // day 2 recycles day 1's prediction
        assert_eq!(&cache.steps[1][0].x[7..], cache.y[0].as_slice());
    }
}
