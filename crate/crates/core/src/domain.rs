//! Flock domain types, unit conventions and the feed-conversion formulas.
//!
//! Units are fixed across the workspace: temperatures in °C, relative
//! humidity in %, bird weight in grams, feed in kilograms. FCR is
//! dimensionless (kg of feed per kg of live weight); the factor 1000 that
//! converts grams to kilograms is folded into both FCR functions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of days in a production flock.
pub const FLOCK_DAYS: usize = 40;
/// Plan variables per day: day index, three temperatures, three humidities.
pub const PLAN_WIDTH: usize = 7;
/// Response variables per day: MdW, dFCpB, NlBpA.
pub const RESPONSE_WIDTH: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("accumulated mortality {mortality} exceeds the initial flock of {initial} birds")]
    NegativeFlock { initial: u64, mortality: u64 },
    #[error("division by zero: {0}")]
    DivisionDomain(&'static str),
    #[error("degenerate bound at position {index}: maxi = mini = {value}")]
    DegenerateBound { index: usize, value: f64 },
    #[error("value {value} at position {index} outside [{lower}, {upper}]")]
    OutOfRange {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("day {day}: {reason}")]
    InvalidPlan { day: u32, reason: String },
    #[error("invalid bounds at position {index}: mini {lower} > maxi {upper}")]
    InvertedBound {
        index: usize,
        lower: f64,
        upper: f64,
    },
    #[error("mortality window {requested} exceeds the {available} recorded days")]
    WindowTooLong { requested: usize, available: usize },
}

pub type Result<T, E = DomainError> = std::result::Result<T, E>;

/// Climate setpoints for one day of the flock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayPlan {
    pub day: u32,
    pub t_min: f64,
    pub t_avg: f64,
    pub t_max: f64,
    pub h_min: f64,
    pub h_avg: f64,
    pub h_max: f64,
}

impl DayPlan {
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| {
            Err(DomainError::InvalidPlan {
                day: self.day,
                reason,
            })
        };
        if !(1..=FLOCK_DAYS as u32).contains(&self.day) {
            return fail(format!("day must lie in 1..={FLOCK_DAYS}"));
        }
        let values = self.climate();
        if values.iter().any(|v| !v.is_finite()) {
            return fail("non-finite setpoint".into());
        }
        if !(self.t_min <= self.t_avg && self.t_avg <= self.t_max) {
            return fail(format!(
                "temperatures not ordered: t_min {} t_avg {} t_max {}",
                self.t_min, self.t_avg, self.t_max
            ));
        }
        if !(self.h_min <= self.h_avg && self.h_avg <= self.h_max) {
            return fail(format!(
                "humidities not ordered: h_min {} h_avg {} h_max {}",
                self.h_min, self.h_avg, self.h_max
            ));
        }
        if self.h_min < 0.0 || self.h_max > 100.0 {
            return fail("humidity outside [0, 100]".into());
        }
        Ok(())
    }

    /// `[Tmin, Tavg, Tmax, Hmin, Havg, Hmax]`
    pub fn climate(&self) -> [f64; 6] {
        [
            self.t_min, self.t_avg, self.t_max, self.h_min, self.h_avg, self.h_max,
        ]
    }

    /// The seven plan inputs `[t, Tmin, Tavg, Tmax, Hmin, Havg, Hmax]`.
    pub fn to_input(&self) -> [f64; PLAN_WIDTH] {
        let c = self.climate();
        [f64::from(self.day), c[0], c[1], c[2], c[3], c[4], c[5]]
    }

    /// Inverse of [`DayPlan::to_input`]. The day entry is rounded.
    pub fn from_input(x: &[f64]) -> Result<Self> {
        if x.len() != PLAN_WIDTH {
            return Err(DomainError::LengthMismatch {
                expected: PLAN_WIDTH,
                actual: x.len(),
            });
        }
        Ok(Self {
            day: x[0].round() as u32,
            t_min: x[1],
            t_avg: x[2],
            t_max: x[3],
            h_min: x[4],
            h_avg: x[5],
            h_max: x[6],
        })
    }
}

/// Measured flock response at the end of one day.
///
/// `dfc` is the cumulative feed delivered to the house up to and including
/// this day; [`FlockSample::daily_feed`] gives the per-day increments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayOutcome {
    pub day: u32,
    /// Mean daily weight, grams.
    pub mdw: f64,
    /// Cumulative feed, kg.
    pub dfc: f64,
    /// Deaths recorded on this day.
    pub dm: u32,
    /// Living birds at the end of the day.
    pub nlb: u32,
    /// Cumulative feed per living bird, kg/bird.
    pub dfcpb: f64,
    /// Living birds per m².
    pub nlbpa: f64,
    /// Mortality per m².
    pub dmpa: f64,
}

impl DayOutcome {
    /// Builds an outcome from raw counters, deriving the per-area and
    /// per-bird quantities.
    pub fn from_raw(
        day: u32,
        mdw: f64,
        dfc: f64,
        dm: u32,
        nlb: u32,
        geometry: &HouseGeometry,
    ) -> Result<Self> {
        let norm = normalize_by_area(f64::from(dm), f64::from(nlb), dfc, geometry, f64::from(nlb))?;
        Ok(Self {
            day,
            mdw,
            dfc,
            dm,
            nlb,
            dfcpb: norm.dfcpb,
            nlbpa: norm.nlbpa,
            dmpa: norm.dmpa,
        })
    }

    /// `[MdW, dFCpB, NlBpA]`
    pub fn response(&self) -> [f64; RESPONSE_WIDTH] {
        [self.mdw, self.dfcpb, self.nlbpa]
    }

    pub fn fcr(&self) -> Result<f64> {
        fcr_normalized(self.dfcpb, self.nlbpa, self.mdw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HouseGeometry {
    pub length_m: f64,
    pub width_m: f64,
    pub area_m2: f64,
    pub capacity: u32,
}

impl HouseGeometry {
    pub fn new(length_m: f64, width_m: f64, capacity: u32) -> Self {
        Self {
            length_m,
            width_m,
            area_m2: length_m * width_m,
            capacity,
        }
    }

    /// 150 m × 16 m, 34 800 birds.
    pub fn large() -> Self {
        Self::new(150.0, 16.0, 34_800)
    }

    /// 150 m × 12 m, 21 600 birds: stocked lighter than the wide house.
    pub fn small() -> Self {
        Self::new(150.0, 12.0, 21_600)
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity == 0 {
            return Err(DomainError::DivisionDomain("house capacity is zero"));
        }
        if !(self.area_m2 > 0.0)
            || (self.area_m2 - self.length_m * self.width_m).abs() > 1e-9 * self.area_m2
        {
            return Err(DomainError::DivisionDomain(
                "house area must equal length × width and be positive",
            ));
        }
        Ok(())
    }
}

/// Day-0 state of a flock: arrival weight (g), feed per bird (kg/bird) and
/// stocking density (bird/m²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialConditions {
    pub mdw: f64,
    pub dfcpb: f64,
    pub nlbpa: f64,
}

impl InitialConditions {
    pub fn response(&self) -> [f64; RESPONSE_WIDTH] {
        [self.mdw, self.dfcpb, self.nlbpa]
    }

    pub fn from_response(y: &[f64]) -> Self {
        Self {
            mdw: y[0],
            dfcpb: y[1],
            nlbpa: y[2],
        }
    }
}

/// One observed (or generated) production flock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlockSample {
    pub flock_id: u32,
    pub house: HouseGeometry,
    pub initial_birds: u32,
    pub initial_conditions: InitialConditions,
    pub plans: Vec<DayPlan>,
    pub outcomes: Vec<DayOutcome>,
}

impl FlockSample {
    pub fn validate(&self) -> Result<()> {
        self.house.validate()?;
        for (len, what) in [
            (self.plans.len(), "plans"),
            (self.outcomes.len(), "outcomes"),
        ] {
            if len != FLOCK_DAYS {
                log::debug!("flock {} has {len} {what}", self.flock_id);
                return Err(DomainError::LengthMismatch {
                    expected: FLOCK_DAYS,
                    actual: len,
                });
            }
        }
        let mut nlb = u64::from(self.initial_birds);
        for (k, (plan, out)) in self.plans.iter().zip(&self.outcomes).enumerate() {
            let day = k as u32 + 1;
            plan.validate()?;
            if plan.day != day || out.day != day {
                return Err(DomainError::InvalidPlan {
                    day,
                    reason: format!(
                        "expected day {day}, found plan day {} outcome day {}",
                        plan.day, out.day
                    ),
                });
            }
            nlb = nlb
                .checked_sub(u64::from(out.dm))
                .ok_or(DomainError::NegativeFlock {
                    initial: u64::from(self.initial_birds),
                    mortality: u64::from(self.initial_birds) + 1,
                })?;
            if u64::from(out.nlb) != nlb {
                return Err(DomainError::InvalidPlan {
                    day,
                    reason: format!(
                        "living birds {} disagree with mortality ledger {nlb}",
                        out.nlb
                    ),
                });
            }
            if !(out.mdw > 0.0) || out.dfc < 0.0 {
                return Err(DomainError::InvalidPlan {
                    day,
                    reason: "weight must be positive and feed non-negative".into(),
                });
            }
            if k > 0 && out.dfc < self.outcomes[k - 1].dfc {
                return Err(DomainError::InvalidPlan {
                    day,
                    reason: "cumulative feed decreased".into(),
                });
            }
        }
        Ok(())
    }

    /// Per-day feed increments (kg) derived from the cumulative series.
    pub fn daily_feed(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.outcomes
            .iter()
            .map(|o| {
                let d = o.dfc - prev;
                prev = o.dfc;
                d
            })
            .collect()
    }

    pub fn final_fcr(&self) -> Result<f64> {
        self.outcomes
            .last()
            .ok_or(DomainError::LengthMismatch {
                expected: FLOCK_DAYS,
                actual: 0,
            })?
            .fcr()
    }
}

/// Living birds after `p` days: the initial flock minus accumulated mortality.
pub fn living_birds(initial_birds: u64, mortality: &[u64], p: usize) -> Result<u64> {
    if p > mortality.len() {
        return Err(DomainError::WindowTooLong {
            requested: p,
            available: mortality.len(),
        });
    }
    let dead: u64 = mortality[..p].iter().sum();
    initial_birds
        .checked_sub(dead)
        .ok_or(DomainError::NegativeFlock {
            initial: initial_birds,
            mortality: dead,
        })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaNormalized {
    pub dmpa: f64,
    pub nlbpa: f64,
    pub dfcpb: f64,
}

pub fn normalize_by_area(
    dm: f64,
    nlb: f64,
    dfc: f64,
    geometry: &HouseGeometry,
    nlb_for_feed: f64,
) -> Result<AreaNormalized> {
    if geometry.area_m2 == 0.0 {
        return Err(DomainError::DivisionDomain("house area is zero"));
    }
    if nlb_for_feed == 0.0 {
        return Err(DomainError::DivisionDomain(
            "no living birds to share the feed",
        ));
    }
    Ok(AreaNormalized {
        dmpa: dm / geometry.area_m2,
        nlbpa: nlb / geometry.area_m2,
        dfcpb: dfc / nlb_for_feed,
    })
}

/// FCR from house totals: `1000 · dfc / (nlb · mdw)`.
pub fn fcr_basic(dfc_cum: f64, nlb: f64, mdw: f64) -> Result<f64> {
    if nlb == 0.0 {
        return Err(DomainError::DivisionDomain("zero living birds"));
    }
    if mdw == 0.0 {
        return Err(DomainError::DivisionDomain("zero mean weight"));
    }
    Ok(1000.0 * dfc_cum / (nlb * mdw))
}

/// FCR from the per-bird / per-area outputs, evaluated as
/// `1000 · (dfcpb / (nlbpa · mdw)) · nlbpa`. The density factor cancels.
pub fn fcr_normalized(dfcpb: f64, nlbpa: f64, mdw: f64) -> Result<f64> {
    if nlbpa == 0.0 {
        return Err(DomainError::DivisionDomain("zero stocking density"));
    }
    if mdw == 0.0 {
        return Err(DomainError::DivisionDomain("zero mean weight"));
    }
    Ok(1000.0 * (dfcpb / (nlbpa * mdw)) * nlbpa)
}

/// How out-of-range inputs are treated by [`Bounds::normalize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NormMode {
    /// Reject values outside `[mini, maxi]`.
    #[default]
    Strict,
    /// Clamp into `[0, 1]` and log a warning. For live telemetry.
    Clamp,
}

/// Per-position lower and upper bounds used by min-max scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub mini: Vec<f64>,
    pub maxi: Vec<f64>,
}

impl Bounds {
    pub fn new(mini: Vec<f64>, maxi: Vec<f64>) -> Result<Self> {
        if mini.len() != maxi.len() {
            return Err(DomainError::LengthMismatch {
                expected: mini.len(),
                actual: maxi.len(),
            });
        }
        for (index, (&lower, &upper)) in mini.iter().zip(&maxi).enumerate() {
            if !(lower <= upper) {
                return Err(DomainError::InvertedBound {
                    index,
                    lower,
                    upper,
                });
            }
        }
        Ok(Self { mini, maxi })
    }

    pub fn len(&self) -> usize {
        self.mini.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mini.is_empty()
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(DomainError::LengthMismatch {
                expected: self.len(),
                actual: n,
            });
        }
        Ok(())
    }

    fn span(&self, index: usize) -> Result<f64> {
        let span = self.maxi[index] - self.mini[index];
        if span == 0.0 {
            return Err(DomainError::DegenerateBound {
                index,
                value: self.mini[index],
            });
        }
        Ok(span)
    }

    pub fn normalize(&self, v: &[f64], mode: NormMode) -> Result<Vec<f64>> {
        let mut out = vec![0.0; v.len()];
        self.normalize_into(v, mode, &mut out)?;
        Ok(out)
    }

    /// Allocation-free variant of [`Bounds::normalize`].
    pub fn normalize_into(&self, v: &[f64], mode: NormMode, out: &mut [f64]) -> Result<()> {
        self.check_len(v.len())?;
        self.check_len(out.len())?;
        for (k, (&x, slot)) in v.iter().zip(out.iter_mut()).enumerate() {
            let span = self.span(k)?;
            let (lower, upper) = (self.mini[k], self.maxi[k]);
            if !(lower <= x && x <= upper) {
                match mode {
                    NormMode::Strict => {
                        return Err(DomainError::OutOfRange {
                            index: k,
                            value: x,
                            lower,
                            upper,
                        })
                    }
                    NormMode::Clamp => {
                        log::warn!("position {k}: {x} outside [{lower}, {upper}], clamped");
                        *slot = if x < lower || x.is_nan() { 0.0 } else { 1.0 };
                        continue;
                    }
                }
            }
            *slot = (x - lower) / span;
        }
        Ok(())
    }

    pub fn denormalize(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v.len())?;
        v.iter()
            .enumerate()
            .map(|(k, &x)| Ok(x * self.span(k)? + self.mini[k]))
            .collect()
    }

    /// Widens each interval by `fraction` of its span on both sides.
    /// Degenerate intervals are widened by `fraction` of their magnitude (or
    /// by `fraction` itself at zero).
    pub fn widened(&self, fraction: f64) -> Self {
        let (mini, maxi) = self
            .mini
            .iter()
            .zip(&self.maxi)
            .map(|(&lo, &hi)| {
                let span = hi - lo;
                let pad = if span > 0.0 {
                    fraction * span
                } else if lo != 0.0 {
                    fraction * lo.abs()
                } else {
                    fraction
                };
                (lo - pad, hi + pad)
            })
            .unzip();
        Self { mini, maxi }
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        v.len() == self.len()
            && v.iter()
                .zip(self.mini.iter().zip(&self.maxi))
                .all(|(x, (lo, hi))| lo <= x && x <= hi)
    }
}

/// Min-max scaling in strict mode with the argument order `(v, maxi, mini)`.
pub fn minmax_norm(v: &[f64], maxi: &[f64], mini: &[f64]) -> Result<Vec<f64>> {
    Bounds::new(mini.to_vec(), maxi.to_vec())?.normalize(v, NormMode::Strict)
}

pub fn minmax_denorm(v_norm: &[f64], maxi: &[f64], mini: &[f64]) -> Result<Vec<f64>> {
    Bounds::new(mini.to_vec(), maxi.to_vec())?.denormalize(v_norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn living_birds_examples() {
        assert_eq!(living_birds(34_800, &[0, 0, 0], 3).unwrap(), 34_800);
        assert_eq!(living_birds(34_800, &[100, 50], 2).unwrap(), 34_650);
        assert!(matches!(
            living_birds(100, &[60, 60], 2),
            Err(DomainError::NegativeFlock { .. })
        ));
        assert!(living_birds(100, &[1], 2).is_err());
    }

    #[test]
    fn area_normalization_examples() {
        let big = HouseGeometry::large();
        let n = normalize_by_area(24.0, 34_800.0, 0.0, &big, 34_800.0).unwrap();
        assert!(close(n.dmpa, 0.01, 1e-15) && close(n.nlbpa, 14.5, 1e-12) && n.dfcpb == 0.0);

        let small = HouseGeometry::small();
        let n = normalize_by_area(0.0, 26_500.0, 26_500.0, &small, 26_500.0).unwrap();
        assert!(close(n.nlbpa, 26_500.0 / 1800.0, 1e-12));
        assert!(close(n.nlbpa, 14.722_222, 1e-6));
        assert_eq!(n.dfcpb, 1.0);

        assert_eq!(
            normalize_by_area(0.0, 0.0, 1.0, &small, 0.0),
            Err(DomainError::DivisionDomain(
                "no living birds to share the feed"
            ))
        );
    }

    #[test]
    fn fcr_examples() {
        assert!(close(
            fcr_basic(148_512.0, 34_000.0, 2800.0).unwrap(),
            1.56,
            1e-12
        ));
        assert_eq!(fcr_basic(0.0, 34_000.0, 42.01).unwrap(), 0.0);
        assert!(fcr_basic(1.0, 0.0, 2800.0).is_err());

        assert!(close(
            fcr_normalized(4.368, 14.5, 2800.0).unwrap(),
            1.56,
            1e-12
        ));
        let back_solved = 1.5610 * 2800.0 / 1000.0;
        assert!(close(
            fcr_normalized(back_solved, 14.735, 2800.0).unwrap(),
            1.5610,
            1e-12
        ));
        assert!(close(
            fcr_normalized(4.3708, 14.735, 2800.0).unwrap(),
            1.5610,
            1e-12
        ));
        assert_eq!(fcr_normalized(0.0, 14.5, 42.01).unwrap(), 0.0);
        assert!(fcr_normalized(1.0, 0.0, 2800.0).is_err());
        assert!(fcr_normalized(1.0, 14.5, 0.0).is_err());
    }

    #[test]
    fn minmax_worked_example() {
        assert_eq!(minmax_norm(&[24.0], &[28.0], &[23.0]).unwrap(), vec![0.2]);
        let n = minmax_norm(
            &[24.0, 26.0, 27.0],
            &[28.0, 27.0, 30.0],
            &[23.0, 22.0, 25.0],
        )
        .unwrap();
        for (a, b) in n.iter().zip([0.2, 0.8, 0.4]) {
            assert!(close(*a, b, 1e-15));
        }
        assert_eq!(minmax_denorm(&[0.2], &[28.0], &[23.0]).unwrap(), vec![24.0]);
        assert_eq!(
            minmax_denorm(&[0.0, 1.0], &[10.0, 10.0], &[0.0, 0.0]).unwrap(),
            vec![0.0, 10.0]
        );
        let mini = [1.0, -3.0];
        assert_eq!(
            minmax_norm(&mini, &[2.0, 4.0], &mini).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn minmax_errors_and_clamp() {
        assert!(matches!(
            minmax_norm(&[1.0], &[1.0], &[1.0]),
            Err(DomainError::DegenerateBound { index: 0, .. })
        ));
        assert!(matches!(
            minmax_norm(&[29.0], &[28.0], &[23.0]),
            Err(DomainError::OutOfRange { index: 0, .. })
        ));
        let b = Bounds::new(vec![23.0], vec![28.0]).unwrap();
        assert_eq!(b.normalize(&[29.0], NormMode::Clamp).unwrap(), vec![1.0]);
        assert_eq!(b.normalize(&[20.0], NormMode::Clamp).unwrap(), vec![0.0]);
        assert!(Bounds::new(vec![2.0], vec![1.0]).is_err());
    }

    #[test]
    fn plan_validation() {
        let ok = DayPlan {
            day: 3,
            t_min: 30.0,
            t_avg: 31.0,
            t_max: 33.0,
            h_min: 50.0,
            h_avg: 55.0,
            h_max: 60.0,
        };
        ok.validate().unwrap();
        assert!(DayPlan { t_min: 34.0, ..ok }.validate().is_err());
        assert!(DayPlan { h_max: 101.0, ..ok }.validate().is_err());
        assert!(DayPlan { day: 41, ..ok }.validate().is_err());
        assert!(DayPlan { day: 0, ..ok }.validate().is_err());
        assert_eq!(DayPlan::from_input(&ok.to_input()).unwrap(), ok);
    }
}
