//! Flock corpora: synthetic generation, CSV persistence, weekly
//! partitioning and the descriptive statistics used to validate them.

pub mod csv_io;
pub mod generator;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::domain::{Bounds, DomainError, FlockSample, FLOCK_DAYS, PLAN_WIDTH, RESPONSE_WIDTH};
use crate::week::{self, Week};

pub use csv_io::{
    load_samples, read_samples, store_samples, write_samples, SAMPLES_SCHEMA_VERSION,
};
pub use generator::{
    condominium_houses, generate_corpus, generate_corpus_from, generate_flock,
    ground_truth_optimum, initial_birds_for, FlockState, GeneratorConfig,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid generator configuration: {0}")]
    ConfigDomain(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("need at least {needed} historical flocks, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("flock already completed all {FLOCK_DAYS} days")]
    FlockComplete,
    #[error("line {line}{}: {message}", day.map(|d| format!(", day {d}")).unwrap_or_default())]
    Parse {
        line: usize,
        day: Option<u32>,
        message: String,
    },
    #[error("schema version {found}, expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Input and target rows of one production week.
///
/// Each input row uses the week input layout (plans of every day plus the
/// outputs of the day before the week); each target row holds the three
/// outputs of every day of the week, day-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklyDataset {
    pub week: Week,
    pub flock_ids: Vec<u32>,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl WeeklyDataset {
    pub fn empty(week: Week) -> Self {
        Self {
            week,
            flock_ids: Vec::new(),
            inputs: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn check_shape(&self) -> Result<(), DatasetError> {
        if self.inputs.len() != self.targets.len() || self.inputs.len() != self.flock_ids.len() {
            return Err(DatasetError::Shape(format!(
                "{}: {} inputs, {} targets, {} ids",
                self.week,
                self.inputs.len(),
                self.targets.len(),
                self.flock_ids.len()
            )));
        }
        let (ni, nt) = (self.week.input_len(), self.week.target_len());
        for (k, (i, t)) in self.inputs.iter().zip(&self.targets).enumerate() {
            if i.len() != ni || t.len() != nt {
                return Err(DatasetError::Shape(format!(
                    "{} row {k}: input {} (want {ni}), target {} (want {nt})",
                    self.week,
                    i.len(),
                    t.len()
                )));
            }
        }
        Ok(())
    }

    /// Rows at the given indices.
    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            week: self.week,
            flock_ids: rows.iter().map(|&r| self.flock_ids[r]).collect(),
            inputs: rows.iter().map(|&r| self.inputs[r].clone()).collect(),
            targets: rows.iter().map(|&r| self.targets[r].clone()).collect(),
        }
    }

    /// Per-position extrema of the input rows.
    pub fn input_extrema(&self) -> Result<Bounds, DatasetError> {
        let first = self
            .inputs
            .first()
            .ok_or(DatasetError::InsufficientData { needed: 1, got: 0 })?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for row in &self.inputs[1..] {
            for (k, &v) in row.iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        Ok(Bounds::new(lo, hi)?)
    }
}

/// Splits each 40-day flock into six weekly rows.
///
/// Week 1 starts from the flock's initial conditions; later weeks start
/// from the last day of the previous week.
pub fn partition_weeks(samples: &[FlockSample]) -> Result<Vec<WeeklyDataset>, DatasetError> {
    let mut out: Vec<WeeklyDataset> = Week::all().map(WeeklyDataset::empty).collect();
    for s in samples {
        if s.plans.len() != FLOCK_DAYS || s.outcomes.len() != FLOCK_DAYS {
            return Err(DatasetError::Shape(format!(
                "flock {} has {} plans and {} outcomes, expected {FLOCK_DAYS}",
                s.flock_id,
                s.plans.len(),
                s.outcomes.len()
            )));
        }
        for (d, w) in out.iter_mut().zip(Week::all()) {
            let range = w.day_range();
            let y0 = if range.start == 0 {
                s.initial_conditions.response()
            } else {
                s.outcomes[range.start - 1].response()
            };
            let mut plans = Vec::with_capacity(PLAN_WIDTH * w.len());
            let mut target = Vec::with_capacity(w.target_len());
            for k in range {
                plans.extend_from_slice(&s.plans[k].to_input());
                target.extend_from_slice(&s.outcomes[k].response());
            }
            d.flock_ids.push(s.flock_id);
            d.inputs.push(week::join_input(&plans, &y0));
            d.targets.push(target);
        }
    }
    Ok(out)
}

/// Reassembles the 40 daily responses of row `row` from weekly targets.
pub fn stitch_targets(weeks: &[WeeklyDataset], row: usize) -> Vec<[f64; RESPONSE_WIDTH]> {
    weeks
        .iter()
        .flat_map(|w| {
            w.targets[row]
                .chunks_exact(RESPONSE_WIDTH)
                .map(|c| [c[0], c[1], c[2]])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeekInterval {
    pub week: Week,
    pub t_avg: Interval,
    pub h_avg: Interval,
}

/// Student-t interval for the mean of `values`.
pub fn t_interval(values: &[f64], level: f64) -> Result<Interval, DatasetError> {
    let n = values.len();
    if n < 2 {
        return Err(DatasetError::InsufficientData { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let t = StudentsT::new(0.0, 1.0, nf - 1.0)
        .map_err(|e| DatasetError::Shape(e.to_string()))?
        .inverse_cdf(0.5 + level / 2.0);
    let half = t * var.sqrt() / nf.sqrt();
    Ok(Interval {
        mean,
        lower: mean - half,
        upper: mean + half,
        n,
    })
}

/// Per-week intervals of the mean Tavg and Havg, pooling every day of the
/// week over all samples.
pub fn weekly_confidence_interval(
    samples: &[FlockSample],
    level: f64,
) -> Result<Vec<WeekInterval>, DatasetError> {
    if samples.len() < 2 {
        return Err(DatasetError::InsufficientData {
            needed: 2,
            got: samples.len(),
        });
    }
    Week::all()
        .map(|w| {
            let days = || {
                samples
                    .iter()
                    .flat_map(move |s| s.plans[w.day_range()].iter())
            };
            let t: Vec<f64> = days().map(|p| p.t_avg).collect();
            let h: Vec<f64> = days().map(|p| p.h_avg).collect();
            Ok(WeekInterval {
                week: w,
                t_avg: t_interval(&t, level)?,
                h_avg: t_interval(&h, level)?,
            })
        })
        .collect()
}

/// Standardises to zero mean and unit (population) variance. A constant
/// series maps to zeros.
pub fn z_scores(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    values
        .iter()
        .map(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 })
        .collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierConfig {
    pub z_threshold: f64,
    pub min_days: usize,
}

impl Default for OutlierConfig {
    fn default() -> Self {
        Self {
            z_threshold: 4.0,
            min_days: 5,
        }
    }
}

/// Series compared by the outlier test.
pub const OUTLIER_SERIES: [&str; 4] = ["mdw", "dfcpb", "nlbpa", "dmpa"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayDiagnostic {
    pub day: u32,
    /// z-score of each of [`OUTLIER_SERIES`] against the history.
    pub z: [f64; 4],
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierDecision {
    pub reject: bool,
    pub flagged_days: Vec<u32>,
    pub days: Vec<DayDiagnostic>,
}

fn outlier_series(s: &FlockSample, day: usize) -> [f64; 4] {
    let o = &s.outcomes[day];
    [o.mdw, o.dfcpb, o.nlbpa, o.dmpa]
}

/// Compares a finished flock with historical flocks day by day. A day is
/// flagged when any series deviates from the historical mean by more than
/// `z_threshold` standard deviations; the flock is rejected when at least
/// `min_days` days are flagged.
pub fn detect_outlier_flock(
    candidate: &FlockSample,
    history: &[FlockSample],
    cfg: &OutlierConfig,
) -> Result<OutlierDecision, DatasetError> {
    if history.len() < 3 {
        return Err(DatasetError::InsufficientHistory {
            needed: 3,
            got: history.len(),
        });
    }
    for s in history.iter().chain(std::iter::once(candidate)) {
        if s.outcomes.len() != FLOCK_DAYS {
            return Err(DatasetError::Shape(format!(
                "flock {} is incomplete",
                s.flock_id
            )));
        }
    }
    let n = history.len() as f64;
    let mut days = Vec::with_capacity(FLOCK_DAYS);
    for d in 0..FLOCK_DAYS {
        let x = outlier_series(candidate, d);
        let mut z = [0.0; 4];
        for k in 0..4 {
            let vals: Vec<f64> = history.iter().map(|s| outlier_series(s, d)[k]).collect();
            let mean = vals.iter().sum::<f64>() / n;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let dev = x[k] - mean;
            z[k] = if sd > 0.0 {
                dev / sd
            } else if dev == 0.0 {
                0.0
            } else {
                dev.signum() * f64::INFINITY
            };
        }
        let flagged = z.iter().any(|v| v.abs() > cfg.z_threshold);
        days.push(DayDiagnostic {
            day: d as u32 + 1,
            z,
            flagged,
        });
    }
    let flagged_days: Vec<u32> = days.iter().filter(|d| d.flagged).map(|d| d.day).collect();
    Ok(OutlierDecision {
        reject: flagged_days.len() >= cfg.min_days,
        flagged_days,
        days,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(n: u32) -> Vec<FlockSample> {
        generate_corpus(&GeneratorConfig::default(), n).unwrap()
    }

    #[test]
    fn partition_shapes_and_stitching() {
        let samples = corpus(12);
        let weeks = partition_weeks(&samples).unwrap();
        assert_eq!(weeks.len(), 6);
        assert_eq!(
            (
                weeks[2].inputs.len(),
                weeks[2].inputs[0].len(),
                weeks[2].targets[0].len()
            ),
            (12, 52, 21)
        );
        assert_eq!(
            (weeks[5].inputs[0].len(), weeks[5].targets[0].len()),
            (38, 15)
        );
        for w in &weeks {
            w.check_shape().unwrap();
        }
        for (row, s) in samples.iter().enumerate() {
            let days = stitch_targets(&weeks, row);
            let expect: Vec<[f64; 3]> = s.outcomes.iter().map(|o| o.response()).collect();
            assert_eq!(days, expect);
        }
        // week w starts where week w-1 ended
        for w in 1..6 {
            let prev = &weeks[w - 1].targets[4];
            let y0 = &weeks[w].inputs[4][week::PREV_OUTPUT];
            assert_eq!(&prev[prev.len() - 3..], y0);
        }
        assert_eq!(
            &weeks[0].inputs[0][week::PREV_OUTPUT],
            &samples[0].initial_conditions.response()
        );
    }

    #[test]
    fn malformed_sample_is_a_shape_error() {
        let mut s = corpus(1);
        s[0].outcomes.pop();
        assert!(matches!(partition_weeks(&s), Err(DatasetError::Shape(_))));
    }

    #[test]
    fn feed_tracks_weight() {
        let samples = corpus(12);
        let mdw: Vec<f64> = (0..FLOCK_DAYS)
            .map(|d| samples.iter().map(|s| s.outcomes[d].mdw).sum::<f64>() / 12.0)
            .collect();
        let feed: Vec<f64> = (0..FLOCK_DAYS)
            .map(|d| samples.iter().map(|s| s.outcomes[d].dfcpb).sum::<f64>() / 12.0)
            .collect();
        assert!(pearson(&mdw, &feed) >= 0.99);
    }

    #[test]
    fn intervals() {
        let samples = corpus(12);
        let ci = weekly_confidence_interval(&samples, 0.95).unwrap();
        assert!(ci[0].t_avg.contains(31.415), "{:?}", ci[0].t_avg);
        let flat = t_interval(&[3.0; 10], 0.95).unwrap();
        assert_eq!((flat.lower, flat.upper), (3.0, 3.0));
        assert!(matches!(
            weekly_confidence_interval(&samples[..1], 0.95),
            Err(DatasetError::InsufficientData { .. })
        ));
    }

    #[test]
    fn z_scores_are_standardised() {
        let z = z_scores(&[1.0, 4.0, 2.0, 9.0, 5.0]);
        let mean = z.iter().sum::<f64>() / 5.0;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 5.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn outliers() {
        let cfg = GeneratorConfig::default();
        let history = corpus(12);
        let fresh = generate_corpus_from_ids(&cfg, 12..15);
        for f in &fresh {
            let d = detect_outlier_flock(f, &history, &OutlierConfig::default()).unwrap();
            assert!(!d.reject, "{:?}", d.flagged_days);
        }
        // a sound outbreak: twenty times the usual losses on days 12-20
        let src = &fresh[0];
        let mut state = FlockState::new(&cfg, src.house, src.initial_birds, src.flock_id).unwrap();
        let mut burst = src.clone();
        for (k, p) in src.plans.iter().enumerate() {
            let extra = if (12..=20).contains(&p.day) {
                src.outcomes[k].dm.max(1) * 19
            } else {
                0
            };
            burst.outcomes[k] = state.step(&cfg, p, extra).unwrap();
        }
        let d = detect_outlier_flock(&burst, &history, &OutlierConfig::default()).unwrap();
        assert!(d.reject);
        for day in 12..=20 {
            assert!(d.flagged_days.contains(&day), "{:?}", d.flagged_days);
        }
        assert!(matches!(
            detect_outlier_flock(&burst, &history[..2], &OutlierConfig::default()),
            Err(DatasetError::InsufficientHistory { .. })
        ));
    }

    fn generate_corpus_from_ids(
        cfg: &GeneratorConfig,
        ids: std::ops::Range<u32>,
    ) -> Vec<FlockSample> {
        generator::generate_corpus_from(cfg, cfg, ids.start, ids.end - ids.start).unwrap()
    }

    #[test]
    fn mean_candidate_is_accepted() {
        let history = corpus(6);
        let mut mean = history[0].clone();
        let avg = |d: usize, f: fn(&crate::domain::DayOutcome) -> f64| {
            history.iter().map(|s| f(&s.outcomes[d])).sum::<f64>() / 6.0
        };
        for (d, o) in mean.outcomes.iter_mut().enumerate() {
            o.mdw = avg(d, |o| o.mdw);
            o.dfcpb = avg(d, |o| o.dfcpb);
            o.nlbpa = avg(d, |o| o.nlbpa);
            o.dmpa = avg(d, |o| o.dmpa);
        }
        let d = detect_outlier_flock(&mean, &history, &OutlierConfig::default()).unwrap();
        assert!(d.flagged_days.is_empty());
        assert!(d.days.iter().all(|d| d.z.iter().all(|z| z.abs() < 1e-9)));
    }
}
