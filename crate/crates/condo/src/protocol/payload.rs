//! Fixed-point payload encodings. Everything is big-endian: temperatures
//! are tenths of a degree (i16), humidities tenths of a percent (u16),
//! weights milligrams (u32), feed grams (u32).

use aviary_core::{DayPlan, HouseGeometry, InitialConditions};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PayloadError {
    #[error("payload is {got} bytes, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("value out of range: {0}")]
    Range(String),
}

type Result<T> = std::result::Result<T, PayloadError>;

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], expected: usize) -> Result<Self> {
        if buf.len() != expected {
            return Err(PayloadError::Length {
                expected,
                got: buf.len(),
            });
        }
        Ok(Self { buf })
    }

    fn take<const N: usize>(&mut self) -> [u8; N] {
        let (head, rest) = self.buf.split_at(N);
        self.buf = rest;
        head.try_into().expect("length checked up front")
    }

    fn u8(&mut self) -> u8 {
        self.take::<1>()[0]
    }

    fn u16(&mut self) -> u16 {
        u16::from_be_bytes(self.take())
    }

    fn i16(&mut self) -> i16 {
        i16::from_be_bytes(self.take())
    }

    fn u32(&mut self) -> u32 {
        u32::from_be_bytes(self.take())
    }
}

fn tenths_i16(v: f64, what: &str) -> Result<i16> {
    let x = (v * 10.0).round();
    if !(f64::from(i16::MIN)..=f64::from(i16::MAX)).contains(&x) {
        return Err(PayloadError::Range(format!("{what} = {v}")));
    }
    Ok(x as i16)
}

fn tenths_u16(v: f64, what: &str) -> Result<u16> {
    let x = (v * 10.0).round();
    if !(0.0..=f64::from(u16::MAX)).contains(&x) {
        return Err(PayloadError::Range(format!("{what} = {v}")));
    }
    Ok(x as u16)
}

fn scaled_u32(v: f64, scale: f64, what: &str) -> Result<u32> {
    let x = (v * scale).round();
    if !(0.0..=f64::from(u32::MAX)).contains(&x) {
        return Err(PayloadError::Range(format!("{what} = {v}")));
    }
    Ok(x as u32)
}

fn day_u16(day: u32) -> Result<u16> {
    u16::try_from(day).map_err(|_| PayloadError::Range(format!("day = {day}")))
}

/// A day plan as it travels on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WirePlan {
    pub day: u16,
    /// Tenths of °C: min, avg, max.
    pub t: [i16; 3],
    /// Tenths of %RH: min, avg, max.
    pub h: [u16; 3],
}

impl WirePlan {
    pub const LEN: usize = 14;

    pub fn from_plan(p: &DayPlan) -> Result<Self> {
        Ok(Self {
            day: day_u16(p.day)?,
            t: [
                tenths_i16(p.t_min, "t_min")?,
                tenths_i16(p.t_avg, "t_avg")?,
                tenths_i16(p.t_max, "t_max")?,
            ],
            h: [
                tenths_u16(p.h_min, "h_min")?,
                tenths_u16(p.h_avg, "h_avg")?,
                tenths_u16(p.h_max, "h_max")?,
            ],
        })
    }

    pub fn to_plan(&self) -> DayPlan {
        let t = self.t.map(|v| f64::from(v) / 10.0);
        let h = self.h.map(|v| f64::from(v) / 10.0);
        DayPlan {
            day: u32::from(self.day),
            t_min: t[0],
            t_avg: t[1],
            t_max: t[2],
            h_min: h[0],
            h_avg: h[1],
            h_max: h[2],
        }
    }

    fn put(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.day.to_be_bytes());
        self.t
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_be_bytes()));
        self.h
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_be_bytes()));
    }

    fn get(r: &mut Reader<'_>) -> Self {
        let day = r.u16();
        let t = [r.i16(), r.i16(), r.i16()];
        let h = [r.u16(), r.u16(), r.u16()];
        Self { day, t, h }
    }
}

/// The plan as a house will hold it after transmission.
pub fn quantize_plan(p: &DayPlan) -> Result<DayPlan> {
    Ok(WirePlan::from_plan(p)?.to_plan())
}

/// Flock id that matches whatever flock a house is raising, for plans
/// broadcast to the whole condominium.
pub const ANY_FLOCK: u32 = 0;

/// WRITE_DAY_PLAN request and reply body, also the READ_DAY_PLAN reply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanWrite {
    pub flock_id: u32,
    pub plan: WirePlan,
}

impl PlanWrite {
    pub const LEN: usize = 4 + WirePlan::LEN;

    pub fn new(flock_id: u32, plan: &DayPlan) -> Result<Self> {
        Ok(Self {
            flock_id,
            plan: WirePlan::from_plan(plan)?,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::LEN);
        out.extend_from_slice(&self.flock_id.to_be_bytes());
        self.plan.put(&mut out);
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf, Self::LEN)?;
        Ok(Self {
            flock_id: r.u32(),
            plan: WirePlan::get(&mut r),
        })
    }
}

/// One day's measurements as a house reports them. Day 0 is the arrival
/// state and carries an all-zero plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Telemetry {
    pub flock_id: u32,
    pub plan: WirePlan,
    pub mdw_mg: u32,
    pub dfc_g: u32,
    pub dm: u32,
    pub nlb: u32,
}

impl Telemetry {
    pub const LEN: usize = 4 + WirePlan::LEN + 16;

    pub fn new(
        flock_id: u32,
        plan: WirePlan,
        mdw_g: f64,
        dfc_kg: f64,
        dm: u32,
        nlb: u32,
    ) -> Result<Self> {
        Ok(Self {
            flock_id,
            plan,
            mdw_mg: scaled_u32(mdw_g, 1000.0, "mdw")?,
            dfc_g: scaled_u32(dfc_kg, 1000.0, "dfc")?,
            dm,
            nlb,
        })
    }

    pub fn day(&self) -> u32 {
        u32::from(self.plan.day)
    }

    pub fn mdw_g(&self) -> f64 {
        f64::from(self.mdw_mg) / 1000.0
    }

    pub fn dfc_kg(&self) -> f64 {
        f64::from(self.dfc_g) / 1000.0
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::LEN);
        out.extend_from_slice(&self.flock_id.to_be_bytes());
        self.plan.put(&mut out);
        for v in [self.mdw_mg, self.dfc_g, self.dm, self.nlb] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf, Self::LEN)?;
        Ok(Self {
            flock_id: r.u32(),
            plan: WirePlan::get(&mut r),
            mdw_mg: r.u32(),
            dfc_g: r.u32(),
            dm: r.u32(),
            nlb: r.u32(),
        })
    }
}

/// READ_TELEMETRY request: an empty body asks for the latest day.
pub fn telemetry_request(day: Option<u32>) -> Result<Vec<u8>> {
    Ok(match day {
        None => vec![],
        Some(d) => day_u16(d)?.to_be_bytes().to_vec(),
    })
}

pub fn decode_telemetry_request(buf: &[u8]) -> Result<Option<u32>> {
    match buf.len() {
        0 => Ok(None),
        _ => {
            let mut r = Reader::new(buf, 2)?;
            Ok(Some(u32::from(r.u16())))
        }
    }
}

/// READ_DAY_PLAN request body.
pub fn day_request(day: u32) -> Result<Vec<u8>> {
    Ok(day_u16(day)?.to_be_bytes().to_vec())
}

pub fn decode_day_request(buf: &[u8]) -> Result<u32> {
    let mut r = Reader::new(buf, 2)?;
    Ok(u32::from(r.u16()))
}

/// REPORT_STATUS reply: the flock a house is raising and where it stands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Status {
    pub flock_id: u32,
    /// Days completed.
    pub day: u16,
    pub pending_plans: u16,
    /// Days run on a carried-over plan because none was written in time.
    pub fallback_days: u16,
    pub complete: bool,
    pub initial_birds: u32,
    pub capacity: u32,
    /// House length and width, decimetres.
    pub length_dm: u16,
    pub width_dm: u16,
    pub arrival_mg: u32,
}

impl Status {
    pub const LEN: usize = 4 + 2 + 2 + 2 + 1 + 4 + 4 + 2 + 2 + 4;

    pub fn geometry(&self) -> HouseGeometry {
        HouseGeometry::new(
            f64::from(self.length_dm) / 10.0,
            f64::from(self.width_dm) / 10.0,
            self.capacity,
        )
    }

    pub fn initial_conditions(&self) -> InitialConditions {
        let g = self.geometry();
        InitialConditions {
            mdw: f64::from(self.arrival_mg) / 1000.0,
            dfcpb: 0.0,
            nlbpa: f64::from(self.initial_birds) / g.area_m2,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::LEN);
        out.extend_from_slice(&self.flock_id.to_be_bytes());
        out.extend_from_slice(&self.day.to_be_bytes());
        out.extend_from_slice(&self.pending_plans.to_be_bytes());
        out.extend_from_slice(&self.fallback_days.to_be_bytes());
        out.push(u8::from(self.complete));
        out.extend_from_slice(&self.initial_birds.to_be_bytes());
        out.extend_from_slice(&self.capacity.to_be_bytes());
        out.extend_from_slice(&self.length_dm.to_be_bytes());
        out.extend_from_slice(&self.width_dm.to_be_bytes());
        out.extend_from_slice(&self.arrival_mg.to_be_bytes());
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf, Self::LEN)?;
        Ok(Self {
            flock_id: r.u32(),
            day: r.u16(),
            pending_plans: r.u16(),
            fallback_days: r.u16(),
            complete: r.u8() != 0,
            initial_birds: r.u32(),
            capacity: r.u32(),
            length_dm: r.u16(),
            width_dm: r.u16(),
            arrival_mg: r.u32(),
        })
    }
}

/// WRITE_MORTALITY body: deaths counted by an operator on `day`, applied at
/// the house's next step. `entry_id` makes retransmissions harmless.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MortalityWrite {
    pub flock_id: u32,
    pub day: u16,
    pub entry_id: u32,
    pub count: u32,
}

impl MortalityWrite {
    pub const LEN: usize = 14;

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::LEN);
        out.extend_from_slice(&self.flock_id.to_be_bytes());
        out.extend_from_slice(&self.day.to_be_bytes());
        out.extend_from_slice(&self.entry_id.to_be_bytes());
        out.extend_from_slice(&self.count.to_be_bytes());
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf, Self::LEN)?;
        Ok(Self {
            flock_id: r.u32(),
            day: r.u16(),
            entry_id: r.u32(),
            count: r.u32(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan() -> DayPlan {
        DayPlan {
            day: 12,
            t_min: 24.96,
            t_avg: 26.5,
            t_max: 28.04,
            h_min: 60.0,
            h_avg: 66.66,
            h_max: 71.0,
        }
    }

    #[test]
    fn plan_fixed_point() {
        let w = PlanWrite::new(7, &plan()).unwrap();
        let bytes = w.encode();
        assert_eq!(bytes.len(), PlanWrite::LEN);
        assert_eq!(&bytes[4..8], &[0, 12, 0x00, 0xFA]); // day 12, 25.0 °C
        assert_eq!(PlanWrite::decode(&bytes).unwrap(), w);
        let q = w.plan.to_plan();
        assert_eq!((q.t_min, q.h_avg), (25.0, 66.7));
        q.validate().unwrap();
        let cold = DayPlan {
            t_min: -3.0,
            t_avg: -2.0,
            t_max: -1.0,
            ..plan()
        };
        assert_eq!(quantize_plan(&cold).unwrap().t_min, -3.0);
        assert!(matches!(
            PlanWrite::decode(&bytes[1..]),
            Err(PayloadError::Length {
                expected: 18,
                got: 17
            })
        ));
    }

    #[test]
    fn telemetry_and_status_roundtrip() {
        let t = Telemetry::new(
            3,
            WirePlan::from_plan(&plan()).unwrap(),
            2801.2345,
            151_234.567_8,
            17,
            33_000,
        )
        .unwrap();
        assert_eq!(t.mdw_mg, 2_801_235);
        assert_eq!(t.dfc_g, 151_234_568);
        assert_eq!(Telemetry::decode(&t.encode()).unwrap(), t);
        assert!(Telemetry::new(3, t.plan, -1.0, 0.0, 0, 0).is_err());

        let s = Status {
            flock_id: 9,
            day: 40,
            pending_plans: 0,
            fallback_days: 2,
            complete: true,
            initial_birds: 30_000,
            capacity: 34_800,
            length_dm: 1500,
            width_dm: 160,
            arrival_mg: 42_100,
        };
        assert_eq!(Status::decode(&s.encode()).unwrap(), s);
        assert_eq!(s.geometry(), HouseGeometry::large());
        assert!((s.initial_conditions().nlbpa - 12.5).abs() < 1e-12);

        let m = MortalityWrite {
            flock_id: 1,
            day: 12,
            entry_id: 99,
            count: 50,
        };
        assert_eq!(MortalityWrite::decode(&m.encode()).unwrap(), m);
        assert_eq!(
            decode_telemetry_request(&telemetry_request(Some(4)).unwrap()).unwrap(),
            Some(4)
        );
        assert_eq!(decode_telemetry_request(&[]).unwrap(), None);
    }
}
