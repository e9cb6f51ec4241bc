//! Surrogate-assisted climate action planning for broiler houses.
//!
//! The crate covers the offline side of the pipeline: flock data and the
//! feed-conversion arithmetic ([`domain`], [`dataset`]), weekly LSTM
//! surrogates of the flock response ([`surrogate`]), a real-valued genetic
//! algorithm ([`evolve`]) and the reverse-week planner that combines them
//! ([`planner`]).

// `!(a <= b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod domain;
pub mod evolve;
pub mod planner;
pub mod surrogate;
pub mod week;

pub use domain::{DayOutcome, DayPlan, FlockSample, HouseGeometry, InitialConditions};
pub use week::Week;
