//! The live side of the system: houses simulated day by day, the framed
//! master/slave link that reaches them, and the supervision service that
//! distributes plans, collects telemetry and keeps the surrogates current.

pub mod condosim;
pub mod protocol;
pub mod supervisor;
