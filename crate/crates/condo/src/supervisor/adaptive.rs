//! Deciding when the surrogates are stale.
//!
//! New flocks are screened for outliers against the history. Once enough
//! of them are accepted (a quarter of the history by default), the current
//! models are tested on them week by week. A retrain is due when the mean
//! absolute relative error of any output passes its threshold, or when the
//! new flocks were run on plans that fall outside the ranges the models
//! were fitted on: predictions are clamped there and can look accurate
//! while the planner's search box no longer covers what is being done.

use aviary_core::dataset::{detect_outlier_flock, partition_weeks, OutlierConfig, OutlierDecision};
use aviary_core::domain::{NormMode, RESPONSE_WIDTH};
use aviary_core::surrogate::WeekModel;
use aviary_core::week::plan_slot;
use aviary_core::FlockSample;
use serde::{Deserialize, Serialize};

use super::SupervisorError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    /// Accepted new flocks needed, as a share of the history size.
    pub min_new_fraction: f64,
    /// Mean absolute relative error (%) above which a retrain is due.
    pub error_threshold_pct: f64,
    /// Share (%) of new plan values outside the model bounds above which a
    /// retrain is due.
    pub domain_threshold_pct: f64,
    pub outlier: OutlierConfig,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            min_new_fraction: 0.25,
            error_threshold_pct: 5.0,
            domain_threshold_pct: 5.0,
            outlier: OutlierConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Keep,
    Retrain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screened {
    pub flock_id: u32,
    pub decision: OutlierDecision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveOutcome {
    pub decision: Decision,
    /// False while too few new flocks have been accepted to judge.
    pub evaluated: bool,
    pub accepted: Vec<u32>,
    pub rejected: Vec<Screened>,
    pub required: usize,
    /// Per-output error of the current models on the accepted flocks, %.
    pub error_pct: Option<[f64; RESPONSE_WIDTH]>,
    pub out_of_domain_pct: Option<f64>,
    pub reason: String,
}

/// Mean absolute relative error (%) of each output, open loop over each
/// week, on the given flocks.
pub fn model_error_pct(
    models: &[WeekModel],
    flocks: &[FlockSample],
) -> Result<[f64; RESPONSE_WIDTH], SupervisorError> {
    let weeks = partition_weeks(flocks)?;
    let mut acc = [0.0; RESPONSE_WIDTH];
    let mut n = 0.0;
    for (m, w) in models.iter().zip(&weeks) {
        for (x, y) in w.inputs.iter().zip(&w.targets) {
            let f = m.forward_week_with(x, NormMode::Clamp)?;
            for (p, t) in f.days.iter().zip(y.chunks_exact(RESPONSE_WIDTH)) {
                for k in 0..RESPONSE_WIDTH {
                    acc[k] += ((p[k] - t[k]) / t[k]).abs();
                }
                n += 1.0;
            }
        }
    }
    Ok(acc.map(|a| 100.0 * a / n))
}

/// Share (%) of the flocks' climate set-points that fall outside the
/// models' input bounds.
pub fn out_of_domain_pct(
    models: &[WeekModel],
    flocks: &[FlockSample],
) -> Result<f64, SupervisorError> {
    let weeks = partition_weeks(flocks)?;
    let (mut out, mut n) = (0usize, 0usize);
    for (m, w) in models.iter().zip(&weeks) {
        for x in &w.inputs {
            for t in 1..=m.week_len {
                // skip the day index, which never leaves its range
                let s = plan_slot(t);
                let slot = s.start + 1..s.end;
                for ((v, lo), hi) in x[slot.clone()]
                    .iter()
                    .zip(&m.bounds.mini[slot.clone()])
                    .zip(&m.bounds.maxi[slot])
                {
                    n += 1;
                    if v < lo || v > hi {
                        out += 1;
                    }
                }
            }
        }
    }
    Ok(100.0 * out as f64 / n.max(1) as f64)
}

pub fn adaptive_cycle(
    new: &[FlockSample],
    history: &[FlockSample],
    models: &[WeekModel],
    cfg: &AdaptiveConfig,
) -> Result<AdaptiveOutcome, SupervisorError> {
    let required = (cfg.min_new_fraction * history.len() as f64).ceil() as usize;
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for s in new {
        let d = detect_outlier_flock(s, history, &cfg.outlier)?;
        if d.reject {
            log::info!(
                "flock {} rejected as an outlier ({} days flagged)",
                s.flock_id,
                d.flagged_days.len()
            );
            rejected.push(Screened {
                flock_id: s.flock_id,
                decision: d,
            });
        } else {
            accepted.push(s.clone());
        }
    }
    let ids: Vec<u32> = accepted.iter().map(|s| s.flock_id).collect();
    if accepted.len() < required.max(1) {
        return Ok(AdaptiveOutcome {
            decision: Decision::Keep,
            evaluated: false,
            reason: format!(
                "{} of {} new flocks needed so far",
                accepted.len(),
                required.max(1)
            ),
            accepted: ids,
            rejected,
            required,
            error_pct: None,
            out_of_domain_pct: None,
        });
    }
    let err = model_error_pct(models, &accepted)?;
    let ood = out_of_domain_pct(models, &accepted)?;
    let worst = err.iter().cloned().fold(0.0, f64::max);
    let (decision, reason) = if worst > cfg.error_threshold_pct {
        (
            Decision::Retrain,
            format!(
                "prediction error {worst:.2}% exceeds {}%",
                cfg.error_threshold_pct
            ),
        )
    } else if ood > cfg.domain_threshold_pct {
        (
            Decision::Retrain,
            format!(
                "{ood:.1}% of new set-points lie outside the model ranges (limit {}%)",
                cfg.domain_threshold_pct
            ),
        )
    } else {
        (
            Decision::Keep,
            format!("error {worst:.2}% and {ood:.1}% out of range are within limits"),
        )
    };
    Ok(AdaptiveOutcome {
        decision,
        evaluated: true,
        accepted: ids,
        rejected,
        required,
        error_pct: Some(err),
        out_of_domain_pct: Some(ood),
        reason,
    })
}
