//! Full-batch BPTT training with step learning-rate decay and L2 on the
//! weight matrices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::Network;
use super::SurrogateError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl Optimizer {
    pub fn adam() -> Self {
        Self::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub epochs: usize,
    pub lr0: f64,
    /// Multiplicative learning-rate decay applied every `decay_every` epochs.
    pub lr_decay: f64,
    pub decay_every: usize,
    pub l2_rate: f64,
    pub hidden_layers: usize,
    pub hidden_size: usize,
    pub optimizer: Optimizer,
    /// Feed the measured previous-day outputs during training instead of
    /// the network's own predictions. Inference is always closed loop.
    #[serde(default)]
    pub teacher_forcing: bool,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            epochs: 1000,
            lr0: 0.005,
            lr_decay: 0.95,
            decay_every: 300,
            l2_rate: 0.003,
            hidden_layers: 3,
            hidden_size: 10,
            optimizer: Optimizer::adam(),
            teacher_forcing: false,
            seed: 1,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), SurrogateError> {
        let ok = self.epochs > 0
            && self.lr0 > 0.0
            && self.lr_decay > 0.0
            && self.lr_decay <= 1.0
            && self.decay_every > 0
            && self.l2_rate >= 0.0
            && self.hidden_layers > 0
            && self.hidden_size > 0;
        if ok {
            Ok(())
        } else {
            Err(SurrogateError::Hyperparams(format!("{self:?}")))
        }
    }

    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.lr0 * self.lr_decay.powi((epoch / self.decay_every) as i32)
    }
}

/// Normalised training sequences.
#[derive(Debug, Clone, Default)]
pub struct SequenceSet {
    /// Per sample: flattened `T × plan_width` plan inputs.
    pub plans: Vec<Vec<f64>>,
    /// Per sample: previous-day outputs feeding day 1.
    pub y0: Vec<Vec<f64>>,
    /// Per sample: `T` target vectors.
    pub targets: Vec<Vec<Vec<f64>>>,
}

impl SequenceSet {
    pub fn len(&self) -> usize {
        self.plans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub mse: f64,
    pub grad: Network,
}

/// Half the squared error summed over days and outputs, averaged over
/// sequences, plus `l2/2 · Σ w²` over weight matrices. `mse` is reported
/// per element.
pub fn loss_and_grad(
    net: &Network,
    set: &SequenceSet,
    l2_rate: f64,
) -> Result<LossGrad, SurrogateError> {
    loss_and_grad_with(net, set, l2_rate, false)
}

/// [`loss_and_grad`], optionally teacher forced.
pub fn loss_and_grad_with(
    net: &Network,
    set: &SequenceSet,
    l2_rate: f64,
    teacher_forcing: bool,
) -> Result<LossGrad, SurrogateError> {
    if set.is_empty() {
        return Err(SurrogateError::EmptyDataset);
    }
    let n = set.len() as f64;
    let mut grad = net.zeros_like();
    let mut sse = 0.0;
    let mut elements = 0usize;
    for s in 0..set.len() {
        let feedback = teacher_forcing.then_some(set.targets[s].as_slice());
        let cache = net.forward_cached_with(&set.plans[s], &set.y0[s], feedback)?;
        let days = cache.y.len();
        if set.targets[s].len() != days {
            return Err(SurrogateError::DimensionMismatch(format!(
                "sample {s}: {days} predicted days but {} target days",
                set.targets[s].len()
            )));
        }
        elements += days * net.n_out();
        let mut dy = Vec::with_capacity(days);
        for (y, target) in cache.y.iter().zip(&set.targets[s]) {
            let d: Vec<f64> = y
                .iter()
                .zip(target)
                .map(|(p, t)| {
                    sse += (p - t) * (p - t);
                    (p - t) / n
                })
                .collect();
            dy.push(d);
        }
        let g = net.backward(&cache, &dy);
        for (acc, part) in grad.tensors_mut().into_iter().zip(g.tensors()) {
            acc.iter_mut().zip(part.0).for_each(|(a, b)| *a += b);
        }
    }
    let mut penalty = 0.0;
    for (g, (w, is_weight)) in grad.tensors_mut().into_iter().zip(net.tensors()) {
        if is_weight && l2_rate > 0.0 {
            for (gi, wi) in g.iter_mut().zip(w) {
                penalty += 0.5 * l2_rate * wi * wi;
                *gi += l2_rate * wi;
            }
        }
    }
    Ok(LossGrad {
        loss: 0.5 * sse / n + penalty,
        mse: sse / elements as f64,
        grad,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub final_loss: f64,
    pub final_mse: f64,
}

/// Initialises a network from `hp` and trains it on `set`.
///
/// The head bias starts at the mean target of each output rather than at
/// zero: with a reLU head, an output whose pre-activation starts negative
/// on every sample never receives a gradient.
pub fn fit(
    set: &SequenceSet,
    input_size: usize,
    n_out: usize,
    hp: &Hyperparams,
) -> Result<(Network, TrainingMeta), SurrogateError> {
    hp.validate()?;
    if set.is_empty() {
        return Err(SurrogateError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut net = Network::he_init(
        input_size,
        hp.hidden_size,
        hp.hidden_layers,
        n_out,
        &mut rng,
    );
    let days: Vec<&Vec<f64>> = set.targets.iter().flatten().collect();
    for (k, b) in net.out_b.iter_mut().enumerate() {
        *b = days.iter().map(|d| d[k]).sum::<f64>() / days.len() as f64;
    }
    let meta = fit_from(&mut net, set, hp)?;
    Ok((net, meta))
}

/// Trains an already initialised network in place.
pub fn fit_from(
    net: &mut Network,
    set: &SequenceSet,
    hp: &Hyperparams,
) -> Result<TrainingMeta, SurrogateError> {
    hp.validate()?;
    let sizes: Vec<usize> = net.tensors().iter().map(|(t, _)| t.len()).collect();
    let mut m: Vec<Vec<f64>> = sizes.iter().map(|&s| vec![0.0; s]).collect();
    let mut v: Vec<Vec<f64>> = sizes.iter().map(|&s| vec![0.0; s]).collect();
    for epoch in 0..hp.epochs {
        let lg = loss_and_grad_with(net, set, hp.l2_rate, hp.teacher_forcing)?;
        if !lg.loss.is_finite() {
            return Err(SurrogateError::Diverged {
                epoch,
                loss: lg.loss,
            });
        }
        let lr = hp.learning_rate(epoch);
        let grads = lg.grad.tensors();
        match hp.optimizer {
            Optimizer::Sgd => {
                for (p, (g, _)) in net.tensors_mut().into_iter().zip(grads) {
                    p.iter_mut().zip(g).for_each(|(w, d)| *w -= lr * d);
                }
            }
            Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                let step = (epoch + 1) as i32;
                let c1 = 1.0 - beta1.powi(step);
                let c2 = 1.0 - beta2.powi(step);
                for (k, (p, (g, _))) in net.tensors_mut().into_iter().zip(grads).enumerate() {
                    for (idx, (w, &d)) in p.iter_mut().zip(g).enumerate() {
                        let mk = &mut m[k][idx];
                        let vk = &mut v[k][idx];
                        *mk = beta1 * *mk + (1.0 - beta1) * d;
                        *vk = beta2 * *vk + (1.0 - beta2) * d * d;
                        *w -= lr * (*mk / c1) / ((*vk / c2).sqrt() + epsilon);
                    }
                }
            }
        }
        if epoch % 250 == 0 {
            log::debug!(
                "epoch {epoch}: loss {:.6e} mse {:.6e} lr {lr:.5}",
                lg.loss,
                lg.mse
            );
        }
    }
    let final_lg = loss_and_grad(net, set, hp.l2_rate)?;
    if !final_lg.loss.is_finite() {
        return Err(SurrogateError::Diverged {
            epoch: hp.epochs,
            loss: final_lg.loss,
        });
    }
    Ok(TrainingMeta {
        seed: hp.seed,
        epochs: hp.epochs,
        final_loss: final_lg.loss,
        final_mse: final_lg.mse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_decay_schedule() {
        let hp = Hyperparams::default();
        assert_eq!(hp.learning_rate(0), 0.005);
        assert_eq!(hp.learning_rate(299), 0.005);
        assert!((hp.learning_rate(300) - 0.005 * 0.95).abs() < 1e-15);
        assert!((hp.learning_rate(999) - 0.005 * 0.95f64.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_hyperparams() {
        let hp = Hyperparams {
            lr_decay: 1.5,
            ..Hyperparams::default()
        };
        assert!(hp.validate().is_err());
        let hp = Hyperparams {
            epochs: 0,
            ..Hyperparams::default()
        };
        assert!(hp.validate().is_err());
    }

    #[test]
    fn constant_targets_are_learned() {
        let mut set = SequenceSet::default();
        for s in 0..6 {
            let plans: Vec<f64> = (0..4 * 7)
                .map(|k| ((k * 7 + s * 3) % 11) as f64 / 11.0)
                .collect();
            set.plans.push(plans);
            set.y0.push(vec![0.4, 0.4, 0.4]);
            set.targets.push(vec![vec![0.4, 0.6, 0.5]; 4]);
        }
        let hp = Hyperparams {
            hidden_size: 6,
            hidden_layers: 2,
            epochs: 1500,
            lr0: 0.01,
            l2_rate: 0.0,
            ..Hyperparams::default()
        };
        let (_, meta) = fit(&set, 10, 3, &hp).unwrap();
        assert!(meta.final_mse < 1e-4, "mse {}", meta.final_mse);
    }

    #[test]
    fn empty_set_is_an_error() {
        let net = Network::zeros(10, 2, 1, 3);
        assert!(matches!(
            loss_and_grad(&net, &SequenceSet::default(), 0.0),
            Err(SurrogateError::EmptyDataset)
        ));
    }
}
