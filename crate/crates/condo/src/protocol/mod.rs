//! Master/slave link between the supervisor and the houses.
//!
//! Frames carry an address, a function code, a length-prefixed payload and
//! a CRC-16, and travel over a byte stream. Slaves never speak unless asked;
//! the master keeps a single request outstanding.

pub mod frame;
pub mod master;
pub mod payload;
pub mod slave;
pub mod transport;

pub use frame::{crc16, ExceptionCode, Frame, FrameError, FunctionCode, BROADCAST, MAX_PAYLOAD};
pub use master::{
    overlapping_requests, EventKind, Master, MasterConfig, MasterError, MasterEvent, Transaction,
};
pub use payload::{
    quantize_plan, MortalityWrite, PayloadError, PlanWrite, Status, Telemetry, WirePlan, ANY_FLOCK,
};
pub use slave::{slave_handle, SlaveState};
