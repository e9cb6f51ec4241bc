//! Weekly LSTM surrogates of the flock response.
//!
//! Each [`WeekModel`] maps a week input vector (plan for every day of the
//! week plus the outputs of the preceding day) to the predicted
//! `[MdW, dFCpB, NlBpA]` of every day in the week. Inputs are min-max
//! scaled with the bounds stored in the model and predictions are scaled
//! back before they are returned.

pub mod cell;
pub mod network;
pub mod tensor;
pub mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{partition_weeks, WeeklyDataset};
use crate::domain::FlockSample;
use crate::domain::{Bounds, DomainError, NormMode, PLAN_WIDTH, RESPONSE_WIDTH};
use crate::week::{self, Week};

pub use cell::{cell_step, LstmLayerParams};
pub use network::Network;
pub use train::{Hyperparams, Optimizer, SequenceSet, TrainingMeta};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("normalisation: {0}")]
    Normalization(#[from] DomainError),
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },
    #[error("output {output} has zero variance in the test set")]
    ZeroVariance { output: &'static str },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),
    #[error("model file schema version {found}, expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("model io: {0}")]
    Io(#[from] std::io::Error),
    #[error("model format: {0}")]
    Format(#[from] serde_json::Error),
}

pub type Result<T, E = SurrogateError> = std::result::Result<T, E>;

pub const OUTPUT_NAMES: [&str; RESPONSE_WIDTH] = ["MdW", "dFCpB", "NlBpA"];

/// Per-variable scaling bounds of one week: the seven plan inputs and the
/// three responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekBounds {
    pub plan: Bounds,
    pub response: Bounds,
}

impl WeekBounds {
    /// Per-variable extrema over every day and sample of the given datasets
    /// (all for the same week), widened by `margin` of the span.
    pub fn fit(data: &[&WeeklyDataset], margin: f64) -> Result<Self> {
        let first = data.first().ok_or(SurrogateError::EmptyDataset)?;
        let w = first.week;
        let mut plan_lo = [f64::INFINITY; PLAN_WIDTH];
        let mut plan_hi = [f64::NEG_INFINITY; PLAN_WIDTH];
        let mut resp_lo = [f64::INFINITY; RESPONSE_WIDTH];
        let mut resp_hi = [f64::NEG_INFINITY; RESPONSE_WIDTH];
        let mut rows = 0;
        for d in data {
            if d.week != w {
                return Err(SurrogateError::DimensionMismatch(format!(
                    "bounds mix {} and {}",
                    w, d.week
                )));
            }
            for (input, target) in d.inputs.iter().zip(&d.targets) {
                rows += 1;
                let (plans, y0) = week::split_input(input, w.len());
                for day in plans.chunks_exact(PLAN_WIDTH) {
                    for k in 0..PLAN_WIDTH {
                        plan_lo[k] = plan_lo[k].min(day[k]);
                        plan_hi[k] = plan_hi[k].max(day[k]);
                    }
                }
                for y in std::iter::once(&y0[..]).chain(target.chunks_exact(RESPONSE_WIDTH)) {
                    for k in 0..RESPONSE_WIDTH {
                        resp_lo[k] = resp_lo[k].min(y[k]);
                        resp_hi[k] = resp_hi[k].max(y[k]);
                    }
                }
            }
        }
        if rows == 0 {
            return Err(SurrogateError::EmptyDataset);
        }
        Ok(Self {
            plan: Bounds::new(plan_lo.to_vec(), plan_hi.to_vec())?.widened(margin),
            response: Bounds::new(resp_lo.to_vec(), resp_hi.to_vec())?.widened(margin),
        })
    }

    /// Bounds laid out like a week input vector.
    pub fn input_bounds(&self, week_len: usize) -> Bounds {
        let n = week::input_len(week_len);
        let mut mini = vec![0.0; n];
        let mut maxi = vec![0.0; n];
        for t in 1..=week_len {
            let slot = week::plan_slot(t);
            mini[slot.clone()].copy_from_slice(&self.plan.mini);
            maxi[slot].copy_from_slice(&self.plan.maxi);
        }
        mini[week::PREV_OUTPUT].copy_from_slice(&self.response.mini);
        maxi[week::PREV_OUTPUT].copy_from_slice(&self.response.maxi);
        Bounds { mini, maxi }
    }

    /// Recovers per-variable bounds from an input-layout bound vector.
    pub fn from_input_bounds(b: &Bounds) -> Self {
        Self {
            plan: Bounds {
                mini: b.mini[..PLAN_WIDTH].to_vec(),
                maxi: b.maxi[..PLAN_WIDTH].to_vec(),
            },
            response: Bounds {
                mini: b.mini[week::PREV_OUTPUT].to_vec(),
                maxi: b.maxi[week::PREV_OUTPUT].to_vec(),
            },
        }
    }
}

/// A trained surrogate for one production week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekModel {
    pub week: Week,
    pub week_len: usize,
    pub network: Network,
    /// Scaling bounds for the week input vector layout.
    pub bounds: Bounds,
    pub hyperparams: Hyperparams,
    pub training: TrainingMeta,
}

/// Result of running a week model over one input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct WeekForecast {
    /// Scaled predictions per day.
    pub normalized: Vec<[f64; RESPONSE_WIDTH]>,
    /// Predictions per day in physical units.
    pub days: Vec<[f64; RESPONSE_WIDTH]>,
}

impl WeekForecast {
    pub fn last(&self) -> [f64; RESPONSE_WIDTH] {
        *self.days.last().expect("a week has at least one day")
    }

    pub fn last_normalized(&self) -> [f64; RESPONSE_WIDTH] {
        *self.normalized.last().expect("a week has at least one day")
    }
}

impl WeekModel {
    /// Untrained model with all parameters zero.
    pub fn zeroed(week: Week, bounds: &WeekBounds, hp: &Hyperparams) -> Self {
        Self {
            week,
            week_len: week.len(),
            network: Network::zeros(
                PLAN_WIDTH + RESPONSE_WIDTH,
                hp.hidden_size,
                hp.hidden_layers,
                RESPONSE_WIDTH,
            ),
            bounds: bounds.input_bounds(week.len()),
            hyperparams: hp.clone(),
            training: TrainingMeta {
                seed: hp.seed,
                epochs: 0,
                final_loss: f64::NAN,
                final_mse: f64::NAN,
            },
        }
    }

    pub fn week_bounds(&self) -> WeekBounds {
        WeekBounds::from_input_bounds(&self.bounds)
    }

    pub fn response_bounds(&self) -> Bounds {
        self.week_bounds().response
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if self.week_len != self.week.len() {
            return Err(SurrogateError::Shape(format!(
                "{} must span {} days, not {}",
                self.week,
                self.week.len(),
                self.week_len
            )));
        }
        if self.network.input_size() != PLAN_WIDTH + RESPONSE_WIDTH
            || self.network.n_out() != RESPONSE_WIDTH
        {
            return Err(SurrogateError::Shape(
                "network must take 10 inputs and produce 3 outputs".into(),
            ));
        }
        if self.bounds.len() != week::input_len(self.week_len)
            || self.bounds.maxi.len() != self.bounds.mini.len()
        {
            return Err(SurrogateError::Shape(
                "bounds do not cover the week input layout".into(),
            ));
        }
        Ok(())
    }

    fn check_input(&self, v: &[f64]) -> Result<()> {
        if v.len() != week::input_len(self.week_len) {
            return Err(SurrogateError::DimensionMismatch(format!(
                "{} expects an input vector of length {}, got {}",
                self.week,
                week::input_len(self.week_len),
                v.len()
            )));
        }
        Ok(())
    }

    /// Normalises the input vector, runs every day in closed loop and
    /// returns the per-day predictions, scaled back to physical units.
    pub fn forward_week(&self, v: &[f64]) -> Result<WeekForecast> {
        self.forward_week_with(v, NormMode::Strict)
    }

    pub fn forward_week_with(&self, v: &[f64], mode: NormMode) -> Result<WeekForecast> {
        self.check_input(v)?;
        let vn = self.bounds.normalize(v, mode)?;
        let (plans, y0) = week::split_input(&vn, self.week_len);
        let pred = self.network.predict(&plans, &y0)?;
        let resp = self.response_bounds();
        let mut normalized = Vec::with_capacity(pred.len());
        let mut days = Vec::with_capacity(pred.len());
        for y in pred {
            let d = resp.denormalize(&y)?;
            normalized.push([y[0], y[1], y[2]]);
            days.push([d[0], d[1], d[2]]);
        }
        Ok(WeekForecast { normalized, days })
    }

    /// Scaled prediction of the last day only. Hot path for the optimiser.
    pub fn forward_last_normalized(&self, v: &[f64]) -> Result<[f64; RESPONSE_WIDTH]> {
        self.check_input(v)?;
        let vn = self.bounds.normalize(v, NormMode::Strict)?;
        let (plans, y0) = week::split_input(&vn, self.week_len);
        let y = self.network.predict_last(&plans, &y0)?;
        Ok([y[0], y[1], y[2]])
    }

    pub fn denormalize_response(&self, y: &[f64]) -> Result<[f64; RESPONSE_WIDTH]> {
        let d = self.response_bounds().denormalize(y)?;
        Ok([d[0], d[1], d[2]])
    }

    pub fn normalize_response(&self, y: &[f64]) -> Result<[f64; RESPONSE_WIDTH]> {
        let b = self.response_bounds();
        let mut out = [0.0; RESPONSE_WIDTH];
        for k in 0..RESPONSE_WIDTH {
            out[k] = (y[k] - b.mini[k]) / (b.maxi[k] - b.mini[k]);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument {
            schema_version: MODEL_SCHEMA_VERSION,
            model: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let probe: serde_json::Value = serde_json::from_str(s)?;
        let found = probe
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .unwrap_or(0) as u32;
        if found != MODEL_SCHEMA_VERSION {
            return Err(SurrogateError::SchemaVersion {
                found,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        let doc: ModelDocument = serde_json::from_value(probe)?;
        doc.model.validate()?;
        Ok(doc.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// File name used for this week inside a model directory.
    pub fn file_name(week: Week) -> String {
        format!("week{}.json", week.index())
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    schema_version: u32,
    model: WeekModel,
}

/// Builds the scaled training sequences of one weekly dataset.
pub fn sequences(data: &WeeklyDataset, bounds: &WeekBounds) -> Result<SequenceSet> {
    let wl = data.week.len();
    let in_bounds = bounds.input_bounds(wl);
    let mut set = SequenceSet::default();
    for (input, target) in data.inputs.iter().zip(&data.targets) {
        let vn = in_bounds.normalize(input, NormMode::Strict)?;
        let (plans, y0) = week::split_input(&vn, wl);
        let mut days = Vec::with_capacity(wl);
        for y in target.chunks_exact(RESPONSE_WIDTH) {
            days.push(bounds.response.normalize(y, NormMode::Strict)?);
        }
        set.plans.push(plans);
        set.y0.push(y0.to_vec());
        set.targets.push(days);
    }
    Ok(set)
}

/// Trains the surrogate of one week.
pub fn train_week_model(
    data: &WeeklyDataset,
    bounds: &WeekBounds,
    hp: &Hyperparams,
) -> Result<WeekModel> {
    if data.inputs.is_empty() {
        return Err(SurrogateError::EmptyDataset);
    }
    data.check_shape()
        .map_err(|e| SurrogateError::DimensionMismatch(e.to_string()))?;
    let set = sequences(data, bounds)?;
    let (network, training) = train::fit(&set, PLAN_WIDTH + RESPONSE_WIDTH, RESPONSE_WIDTH, hp)?;
    let model = WeekModel {
        week: data.week,
        week_len: data.week.len(),
        network,
        bounds: bounds.input_bounds(data.week.len()),
        hyperparams: hp.clone(),
        training,
    };
    model.validate()?;
    Ok(model)
}

/// Share of each variable's observed span added on both sides of the
/// scaling bounds, so the search can move a little past historical plans.
pub const BOUNDS_MARGIN: f64 = 0.05;

/// Trains all six weekly surrogates on `samples`, in parallel. Each week is
/// seeded from `hp.seed`, so the result does not depend on thread timing.
pub fn train_models(samples: &[FlockSample], hp: &Hyperparams) -> Result<Vec<WeekModel>> {
    use rayon::prelude::*;
    let weeks = partition_weeks(samples).map_err(|e| SurrogateError::Shape(e.to_string()))?;
    weeks
        .par_iter()
        .map(|w| {
            let bounds = WeekBounds::fit(&[w], BOUNDS_MARGIN)?;
            train_week_model(w, &bounds, hp)
        })
        .collect()
}

/// Writes one file per week into `dir`, creating it if needed.
pub fn save_models(models: &[WeekModel], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for m in models {
        m.save(dir.join(WeekModel::file_name(m.week)))?;
    }
    Ok(())
}

/// Loads the six weekly models saved by [`save_models`].
pub fn load_models(dir: impl AsRef<Path>) -> Result<Vec<WeekModel>> {
    let dir = dir.as_ref();
    Week::all()
        .map(|w| {
            let m = WeekModel::load(dir.join(WeekModel::file_name(w)))?;
            if m.week != w {
                return Err(SurrogateError::DimensionMismatch(format!(
                    "{} found in the file for {w}",
                    m.week
                )));
            }
            Ok(m)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct R2Report {
    pub mdw: f64,
    pub dfcpb: f64,
    pub nlbpa: f64,
}

impl R2Report {
    pub fn as_array(&self) -> [f64; 3] {
        [self.mdw, self.dfcpb, self.nlbpa]
    }
}

/// Coefficient of determination `1 − SS_res / SS_tot` for one series.
pub fn r_squared(predicted: &[f64], actual: &[f64]) -> Option<f64> {
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return None;
    }
    let ss_res: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a).powi(2))
        .sum();
    Some(1.0 - ss_res / ss_tot)
}

/// Per-output R² of the model on a held-out weekly dataset, pooled over
/// samples and days, computed on scaled outputs.
pub fn evaluate_r2(model: &WeekModel, test: &WeeklyDataset) -> Result<R2Report> {
    if test.inputs.is_empty() {
        return Err(SurrogateError::EmptyDataset);
    }
    let resp = model.response_bounds();
    let mut pred: [Vec<f64>; 3] = Default::default();
    let mut actual: [Vec<f64>; 3] = Default::default();
    for (input, target) in test.inputs.iter().zip(&test.targets) {
        let fc = model.forward_week_with(input, NormMode::Clamp)?;
        for (p, y) in fc
            .normalized
            .iter()
            .zip(target.chunks_exact(RESPONSE_WIDTH))
        {
            for k in 0..RESPONSE_WIDTH {
                pred[k].push(p[k]);
                actual[k].push((y[k] - resp.mini[k]) / (resp.maxi[k] - resp.mini[k]));
            }
        }
    }
    let r = |k: usize| {
        r_squared(&pred[k], &actual[k]).ok_or(SurrogateError::ZeroVariance {
            output: OUTPUT_NAMES[k],
        })
    };
    Ok(R2Report {
        mdw: r(0)?,
        dfcpb: r(1)?,
        nlbpa: r(2)?,
    })
}
