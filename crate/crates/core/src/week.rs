//! Weekly partition of the 40-day flock and the week input-vector layout.
//!
//! A week input vector (and GA genome) is laid out as
//! `[x⟨1⟩ (7), ŷ⟨0⟩ (3), x⟨2⟩ (7), …, x⟨wS⟩ (7)]`, length `7·wS + 3`, where
//! `x⟨t⟩ = [day, Tmin, Tavg, Tmax, Hmin, Havg, Hmax]` and `ŷ⟨0⟩` holds the
//! outputs of the day before the week starts.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Range;

use crate::domain::{PLAN_WIDTH, RESPONSE_WIDTH};

pub const WEEKS: usize = 6;

/// Index of a production week, `1..=6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Week(u8);

impl Week {
    pub fn new(index: u8) -> Option<Self> {
        (1..=WEEKS as u8).contains(&index).then_some(Self(index))
    }

    pub fn all() -> impl DoubleEndedIterator<Item = Week> {
        (1..=WEEKS as u8).map(Week)
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// 7 for weeks 1–5, 5 for week 6.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(self) -> usize {
        if self.0 < 6 {
            7
        } else {
            5
        }
    }

    pub fn first_day(self) -> u32 {
        7 * (u32::from(self.0) - 1) + 1
    }

    pub fn last_day(self) -> u32 {
        self.first_day() + self.len() as u32 - 1
    }

    /// Zero-based day offsets into a 40-day series.
    pub fn day_range(self) -> Range<usize> {
        let start = self.first_day() as usize - 1;
        start..start + self.len()
    }

    pub fn input_len(self) -> usize {
        input_len(self.len())
    }

    pub fn target_len(self) -> usize {
        RESPONSE_WIDTH * self.len()
    }

    pub fn next(self) -> Option<Week> {
        Week::new(self.0 + 1)
    }

    pub fn prev(self) -> Option<Week> {
        Week::new(self.0.wrapping_sub(1))
    }

    pub fn of_day(day: u32) -> Option<Week> {
        if !(1..=40).contains(&day) {
            return None;
        }
        Week::new(((day - 1) / 7 + 1).min(6) as u8)
    }
}

impl TryFrom<u8> for Week {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Week::new(v).ok_or_else(|| format!("week index {v} outside 1..=6"))
    }
}

impl From<Week> for u8 {
    fn from(w: Week) -> u8 {
        w.0
    }
}

impl fmt::Display for Week {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "week {}", self.0)
    }
}

/// `7·wS + 3`
pub const fn input_len(week_len: usize) -> usize {
    PLAN_WIDTH * week_len + RESPONSE_WIDTH
}

/// Positions of the previous-output slot `ŷ⟨0⟩`.
pub const PREV_OUTPUT: Range<usize> = PLAN_WIDTH..PLAN_WIDTH + RESPONSE_WIDTH;

/// Positions of `x⟨t⟩` for the 1-based day-of-week `t`.
pub fn plan_slot(t: usize) -> Range<usize> {
    assert!(t >= 1, "day-of-week is 1-based");
    if t == 1 {
        0..PLAN_WIDTH
    } else {
        let start = PLAN_WIDTH * t - 4;
        start..start + PLAN_WIDTH
    }
}

/// Splits an input vector into the flattened per-day plans and `ŷ⟨0⟩`.
pub fn split_input(v: &[f64], week_len: usize) -> (Vec<f64>, [f64; RESPONSE_WIDTH]) {
    debug_assert_eq!(v.len(), input_len(week_len));
    let mut plans = Vec::with_capacity(PLAN_WIDTH * week_len);
    for t in 1..=week_len {
        plans.extend_from_slice(&v[plan_slot(t)]);
    }
    let mut y0 = [0.0; RESPONSE_WIDTH];
    y0.copy_from_slice(&v[PREV_OUTPUT]);
    (plans, y0)
}

/// Inverse of [`split_input`].
pub fn join_input(plans: &[f64], y0: &[f64]) -> Vec<f64> {
    let week_len = plans.len() / PLAN_WIDTH;
    let mut v = vec![0.0; input_len(week_len)];
    for t in 1..=week_len {
        v[plan_slot(t)].copy_from_slice(&plans[(t - 1) * PLAN_WIDTH..t * PLAN_WIDTH]);
    }
    v[PREV_OUTPUT].copy_from_slice(y0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn week_geometry() {
        let w1 = Week::new(1).unwrap();
        let w6 = Week::new(6).unwrap();
        assert_eq!((w1.first_day(), w1.last_day(), w1.input_len()), (1, 7, 52));
        assert_eq!(
            (w6.first_day(), w6.last_day(), w6.input_len()),
            (36, 40, 38)
        );
        assert_eq!(Week::new(3).unwrap().day_range(), 14..21);
        assert!(Week::new(0).is_none() && Week::new(7).is_none());
        assert_eq!(Week::of_day(36), Some(w6));
        assert_eq!(Week::of_day(35).unwrap().index(), 5);
        let total: usize = Week::all().map(Week::len).sum();
        assert_eq!(total, 40);
    }

    #[test]
    fn slots_tile_the_vector() {
        // 1-based positions [7t−3, 7t+3]
        assert_eq!(plan_slot(2), 10..17);
        assert_eq!(plan_slot(7), 45..52);
        let v: Vec<f64> = (0..52).map(f64::from).collect();
        let (plans, y0) = split_input(&v, 7);
        assert_eq!(y0, [7.0, 8.0, 9.0]);
        assert_eq!(&plans[..7], &v[..7]);
        assert_eq!(&plans[7..14], &v[10..17]);
        assert_eq!(join_input(&plans, &y0), v);
    }
}
