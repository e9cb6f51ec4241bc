//! Request handling on the house side.

use super::frame::{ExceptionCode, Frame, FunctionCode, BROADCAST};
use super::payload::{
    decode_day_request, decode_telemetry_request, MortalityWrite, PlanWrite, Status, Telemetry,
};

/// What a house exposes to the protocol. Errors are the exception code the
/// reply should carry.
pub trait SlaveState {
    fn address(&self) -> u8;
    fn telemetry(&self, day: Option<u32>) -> Result<Telemetry, ExceptionCode>;
    /// Stores a plan for a future day. Writing the same plan again must be
    /// a no-op.
    fn write_plan(&mut self, w: &PlanWrite) -> Result<(), ExceptionCode>;
    fn read_plan(&self, day: u32) -> Result<PlanWrite, ExceptionCode>;
    fn status(&self) -> Status;
    fn record_mortality(&mut self, m: &MortalityWrite) -> Result<(), ExceptionCode>;
}

/// Answers one request. Frames addressed elsewhere get no reply, and
/// neither does a broadcast, which may only carry WRITE_DAY_PLAN.
pub fn slave_handle<S: SlaveState + ?Sized>(state: &mut S, req: &Frame) -> Option<Frame> {
    let own = state.address();
    if req.address != own && req.address != BROADCAST {
        return None;
    }
    let result = dispatch(state, req);
    if req.address == BROADCAST {
        return None;
    }
    Some(match result {
        Ok(payload) => Frame {
            address: own,
            function: req.function,
            payload,
        },
        Err(code) => Frame::exception(own, req.function, code),
    })
}

fn dispatch<S: SlaveState + ?Sized>(state: &mut S, req: &Frame) -> Result<Vec<u8>, ExceptionCode> {
    let bad = |_| ExceptionCode::IllegalDataValue;
    let code = match req.code() {
        Some(c) if !req.is_exception() => c,
        _ => return Err(ExceptionCode::IllegalFunction),
    };
    if req.address == BROADCAST && code != FunctionCode::WriteDayPlan {
        return Err(ExceptionCode::IllegalFunction);
    }
    match code {
        FunctionCode::ReadTelemetry => {
            let day = decode_telemetry_request(&req.payload).map_err(bad)?;
            Ok(state.telemetry(day)?.encode())
        }
        FunctionCode::WriteDayPlan => {
            let w = PlanWrite::decode(&req.payload).map_err(bad)?;
            w.plan
                .to_plan()
                .validate()
                .map_err(|_| ExceptionCode::IllegalDataValue)?;
            state.write_plan(&w)?;
            Ok(req.payload.clone())
        }
        FunctionCode::ReadDayPlan => {
            let day = decode_day_request(&req.payload).map_err(bad)?;
            Ok(state.read_plan(day)?.encode())
        }
        FunctionCode::ReportStatus => {
            if !req.payload.is_empty() {
                return Err(ExceptionCode::IllegalDataValue);
            }
            Ok(state.status().encode())
        }
        FunctionCode::WriteMortality => {
            let m = MortalityWrite::decode(&req.payload).map_err(bad)?;
            state.record_mortality(&m)?;
            Ok(req.payload.clone())
        }
    }
}
