//! Climate action planning for broiler condominiums.
//!
//! This crate gathers the offline planning stack of [`aviary_core`] and the
//! live side of [`aviary_condo`] behind one import, and hosts the `aviary`
//! command line. Most users start from the runnable examples:
//!
//! ```text
//! examples/
//! ├── fcr_algebra.rs          feed conversion and area normalisation
//! ├── generate_corpus.rs      synthetic flocks and their weekly statistics
//! ├── train_surrogates.rs     six weekly LSTMs and their held-out R²
//! ├── evolve_sphere.rs        the genetic algorithm on its own
//! ├── optimize_plan.rs        reverse-week planning of a 40-day plan
//! ├── oracle_vs_ga.rs         exhaustive grid against the GA on a small box
//! ├── random_benchmark.rs     random feasible plans as a baseline
//! ├── outlier_screening.rs    rejecting an abnormal flock
//! ├── condominium.rs          simulated houses polled over the framed link
//! ├── supervisor_api.rs       the supervision service and its HTTP API
//! ├── adaptive_cycle.rs       deciding when the surrogates are stale
//! └── plots.rs                SVG charts of a planner run
//! ```
//!
//! ```bash
//! cargo run --release -p aviary --example optimize_plan
//! ```

pub mod cli;
pub mod plot;

pub use aviary_condo::{condosim, protocol, supervisor};
pub use aviary_core::{dataset, domain, evolve, planner, surrogate, week};
pub use aviary_core::{DayOutcome, DayPlan, FlockSample, HouseGeometry, InitialConditions, Week};
