//! Day-stepped simulation of a poultry condominium.
//!
//! Each house raises one flock with the generator's daily transition and
//! answers protocol requests as a slave. A gateway task accepts master
//! connections and routes frames to houses by address. All houses sit
//! behind one lock, so a tick moves every house together and a request sees
//! the condominium either before or after a tick.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use aviary_core::dataset::{
    condominium_houses, initial_birds_for, DatasetError, FlockState, GeneratorConfig,
};
use aviary_core::domain::{DayOutcome, DayPlan, FlockSample, HouseGeometry, FLOCK_DAYS};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::watch;
use tokio::task::JoinHandle;

use crate::protocol::frame::{ExceptionCode, Frame, BROADCAST, MAX_ADDRESS};
use crate::protocol::payload::{
    MortalityWrite, PayloadError, PlanWrite, Status, Telemetry, WirePlan, ANY_FLOCK,
};
use crate::protocol::slave::{slave_handle, SlaveState};
use crate::protocol::transport::{read_frame, write_raw};

pub const CONDO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("flock is complete after day {FLOCK_DAYS}")]
    FlockComplete,
    #[error("address {0} is used by more than one house")]
    AddressCollision(u8),
    #[error("address {0} is outside 1..=247")]
    InvalidAddress(u8),
    #[error("no house at address {0}")]
    UnknownHouse(u8),
    #[error("condominium needs at least one house")]
    Empty,
    #[error("unsupported condominium schema version {0}")]
    SchemaVersion(u32),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Payload(#[from] PayloadError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseConfig {
    pub address: u8,
    pub geometry: HouseGeometry,
    /// Birds placed; drawn from the house capacity when absent.
    #[serde(default)]
    pub initial_birds: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondoConfig {
    pub schema_version: u32,
    pub houses: Vec<HouseConfig>,
    /// Wall-clock length of one simulated day, milliseconds. Without it the
    /// condominium only advances when told to.
    #[serde(default)]
    pub tick_ms: Option<u64>,
    /// Seed of the bird response; replaces the generator's own seed.
    pub seed: u64,
    pub generator: GeneratorConfig,
    /// Flock id of the first house; the others follow in order.
    pub first_flock_id: u32,
}

impl Default for CondoConfig {
    fn default() -> Self {
        Self::with_houses(3)
    }
}

impl CondoConfig {
    /// `n` houses at addresses `1..=n`, cycling through the reference
    /// house shapes.
    pub fn with_houses(n: u8) -> Self {
        let shapes = condominium_houses();
        Self {
            schema_version: CONDO_SCHEMA_VERSION,
            houses: (1..=n)
                .map(|a| HouseConfig {
                    address: a,
                    geometry: shapes[usize::from(a - 1) % shapes.len()],
                    initial_birds: None,
                })
                .collect(),
            tick_ms: None,
            seed: 7,
            generator: GeneratorConfig::default(),
            first_flock_id: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONDO_SCHEMA_VERSION {
            return Err(SimError::SchemaVersion(self.schema_version));
        }
        if self.houses.is_empty() {
            return Err(SimError::Empty);
        }
        let mut seen = BTreeSet::new();
        for h in &self.houses {
            if h.address == BROADCAST || h.address > MAX_ADDRESS {
                return Err(SimError::InvalidAddress(h.address));
            }
            if !seen.insert(h.address) {
                return Err(SimError::AddressCollision(h.address));
            }
            h.geometry.validate().map_err(DatasetError::from)?;
        }
        self.birds().validate()?;
        Ok(())
    }

    /// Generator the houses' birds follow.
    pub fn birds(&self) -> GeneratorConfig {
        GeneratorConfig {
            seed: self.seed,
            ..self.generator.clone()
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// One simulated day as the house recorded it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub plan: DayPlan,
    pub outcome: DayOutcome,
    /// The plan was carried over because none arrived for the day.
    pub fallback: bool,
    /// Operator-entered deaths folded into the day's mortality.
    pub injected_deaths: u32,
}

/// A plan waiting for its day, with the precision it arrived in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Pending {
    write: PlanWrite,
    plan: DayPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseSim {
    pub address: u8,
    pub geometry: HouseGeometry,
    generator: GeneratorConfig,
    state: FlockState,
    ledger: Vec<LedgerEntry>,
    pending: BTreeMap<u32, Pending>,
    last_received: Option<DayPlan>,
    injected: u32,
    mortality_entries: BTreeSet<u32>,
    fallback_days: u32,
}

impl HouseSim {
    pub fn new(
        address: u8,
        geometry: HouseGeometry,
        generator: GeneratorConfig,
        initial_birds: u32,
        flock_id: u32,
    ) -> Result<Self> {
        let state = FlockState::new(&generator, geometry, initial_birds, flock_id)?;
        Ok(Self {
            address,
            geometry,
            generator,
            state,
            ledger: Vec::with_capacity(FLOCK_DAYS),
            pending: BTreeMap::new(),
            last_received: None,
            injected: 0,
            mortality_entries: BTreeSet::new(),
            fallback_days: 0,
        })
    }

    pub fn flock_id(&self) -> u32 {
        self.state.flock_id
    }

    /// Days completed.
    pub fn day(&self) -> u32 {
        self.state.day
    }

    pub fn is_complete(&self) -> bool {
        self.state.is_complete()
    }

    pub fn ledger(&self) -> &[LedgerEntry] {
        &self.ledger
    }

    pub fn fallback_days(&self) -> u32 {
        self.fallback_days
    }

    pub fn flock_state(&self) -> &FlockState {
        &self.state
    }

    /// Queues a plan without passing it through the wire encoding.
    pub fn set_plan(&mut self, plan: &DayPlan) -> Result<()> {
        plan.validate().map_err(DatasetError::from)?;
        let write = PlanWrite::new(self.flock_id(), plan)?;
        self.pending
            .insert(plan.day, Pending { write, plan: *plan });
        self.last_received = Some(*plan);
        Ok(())
    }

    /// Plan used when none was written for `day`: the last plan received,
    /// or the generator's comfort plan while nothing has arrived yet.
    fn fallback_plan(&self, day: u32) -> DayPlan {
        match self.last_received {
            Some(p) => DayPlan { day, ..p },
            None => self.generator.comfort_plan()[day as usize - 1],
        }
    }

    pub fn step_day(&mut self) -> Result<DayOutcome> {
        if self.is_complete() {
            return Err(SimError::FlockComplete);
        }
        let day = self.state.day + 1;
        let (plan, fallback) = match self.pending.remove(&day) {
            Some(p) => (p.plan, false),
            None => {
                log::warn!(
                    "house {}: no plan for day {day}, carrying the previous one",
                    self.address
                );
                self.fallback_days += 1;
                (self.fallback_plan(day), true)
            }
        };
        self.pending.retain(|&d, _| d > day);
        let injected = std::mem::take(&mut self.injected);
        let outcome = self.state.step(&self.generator, &plan, injected)?;
        self.ledger.push(LedgerEntry {
            plan,
            outcome,
            fallback,
            injected_deaths: injected,
        });
        Ok(outcome)
    }

    /// Adds operator-counted deaths to the next simulated day.
    pub fn inject_mortality(&mut self, count: u32) {
        self.injected = self.injected.saturating_add(count);
    }

    /// Telemetry record for `day` (0 is arrival) exactly as served on the
    /// wire.
    pub fn telemetry_record(&self, day: u32) -> Result<Telemetry, ExceptionCode> {
        let s = &self.state;
        if day > s.day {
            return Err(ExceptionCode::IllegalDataAddress);
        }
        let r = if day == 0 {
            let ic = s.initial_conditions;
            let plan = WirePlan {
                day: 0,
                t: [0; 3],
                h: [0; 3],
            };
            Telemetry::new(s.flock_id, plan, ic.mdw, 0.0, 0, s.initial_birds)
        } else {
            let e = &self.ledger[day as usize - 1];
            WirePlan::from_plan(&e.plan).and_then(|p| {
                Telemetry::new(
                    s.flock_id,
                    p,
                    e.outcome.mdw,
                    e.outcome.dfc,
                    e.outcome.dm,
                    e.outcome.nlb,
                )
            })
        };
        r.map_err(|_| ExceptionCode::DeviceFailure)
    }

    /// The completed flock as a sample, once day 40 has run.
    pub fn sample(&self) -> Option<FlockSample> {
        self.is_complete().then(|| FlockSample {
            flock_id: self.flock_id(),
            house: self.geometry,
            initial_birds: self.state.initial_birds,
            initial_conditions: self.state.initial_conditions,
            plans: self.ledger.iter().map(|e| e.plan).collect(),
            outcomes: self.ledger.iter().map(|e| e.outcome).collect(),
        })
    }
}

impl SlaveState for HouseSim {
    fn address(&self) -> u8 {
        self.address
    }

    fn telemetry(&self, day: Option<u32>) -> Result<Telemetry, ExceptionCode> {
        self.telemetry_record(day.unwrap_or(self.state.day))
    }

    fn write_plan(&mut self, w: &PlanWrite) -> Result<(), ExceptionCode> {
        let day = u32::from(w.plan.day);
        if (w.flock_id != ANY_FLOCK && w.flock_id != self.flock_id())
            || day == 0
            || day as usize > FLOCK_DAYS
        {
            return Err(ExceptionCode::IllegalDataValue);
        }
        if day <= self.state.day {
            // a retransmission of a plan that already ran is still a success
            let ran = WirePlan::from_plan(&self.ledger[day as usize - 1].plan).ok();
            return if ran == Some(w.plan) {
                Ok(())
            } else {
                Err(ExceptionCode::IllegalDataValue)
            };
        }
        if self.pending.get(&day).map(|p| &p.write) != Some(w) {
            let plan = w.plan.to_plan();
            self.pending.insert(day, Pending { write: *w, plan });
            self.last_received = Some(plan);
        }
        Ok(())
    }

    fn read_plan(&self, day: u32) -> Result<PlanWrite, ExceptionCode> {
        if let Some(p) = self.pending.get(&day) {
            return Ok(p.write);
        }
        let e = day
            .checked_sub(1)
            .and_then(|i| self.ledger.get(i as usize))
            .ok_or(ExceptionCode::IllegalDataAddress)?;
        PlanWrite::new(self.flock_id(), &e.plan).map_err(|_| ExceptionCode::DeviceFailure)
    }

    fn status(&self) -> Status {
        let s = &self.state;
        Status {
            flock_id: s.flock_id,
            day: s.day as u16,
            pending_plans: self.pending.len() as u16,
            fallback_days: self.fallback_days as u16,
            complete: s.is_complete(),
            initial_birds: s.initial_birds,
            capacity: self.geometry.capacity,
            length_dm: (self.geometry.length_m * 10.0).round() as u16,
            width_dm: (self.geometry.width_m * 10.0).round() as u16,
            arrival_mg: (s.initial_conditions.mdw * 1000.0).round() as u32,
        }
    }

    fn record_mortality(&mut self, m: &MortalityWrite) -> Result<(), ExceptionCode> {
        if m.flock_id != self.flock_id() || self.is_complete() || u32::from(m.day) != self.state.day
        {
            return Err(ExceptionCode::IllegalDataValue);
        }
        if self.mortality_entries.insert(m.entry_id) {
            self.inject_mortality(m.count);
        }
        Ok(())
    }
}

/// Every house of the condominium plus the tick counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondoSnapshot {
    pub tick: u64,
    pub houses: Vec<HouseSim>,
}

impl CondoSnapshot {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseView {
    pub address: u8,
    pub flock_id: u32,
    pub day: u32,
    pub complete: bool,
    pub fallback_days: u32,
    pub ledger_tail: Vec<LedgerEntry>,
}

/// Read-only summary taken within one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondoView {
    pub tick: u64,
    pub houses: Vec<HouseView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condominium {
    tick: u64,
    houses: BTreeMap<u8, HouseSim>,
}

impl Condominium {
    pub fn new(cfg: &CondoConfig) -> Result<Self> {
        cfg.validate()?;
        let birds = cfg.birds();
        let houses = cfg
            .houses
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let flock_id = cfg.first_flock_id + i as u32;
                let n = h
                    .initial_birds
                    .unwrap_or_else(|| initial_birds_for(&birds, h.geometry, flock_id));
                Ok((
                    h.address,
                    HouseSim::new(h.address, h.geometry, birds.clone(), n, flock_id)?,
                ))
            })
            .collect::<Result<_>>()?;
        Ok(Self { tick: 0, houses })
    }

    pub fn from_snapshot(s: CondoSnapshot) -> Result<Self> {
        let mut houses = BTreeMap::new();
        for h in s.houses {
            let a = h.address;
            if houses.insert(a, h).is_some() {
                return Err(SimError::AddressCollision(a));
            }
        }
        if houses.is_empty() {
            return Err(SimError::Empty);
        }
        Ok(Self {
            tick: s.tick,
            houses,
        })
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn house(&self, address: u8) -> Option<&HouseSim> {
        self.houses.get(&address)
    }

    pub fn house_mut(&mut self, address: u8) -> Option<&mut HouseSim> {
        self.houses.get_mut(&address)
    }

    pub fn houses(&self) -> impl Iterator<Item = &HouseSim> {
        self.houses.values()
    }

    pub fn addresses(&self) -> Vec<u8> {
        self.houses.keys().copied().collect()
    }

    pub fn is_complete(&self) -> bool {
        self.houses.values().all(HouseSim::is_complete)
    }

    /// Steps every house with a flock still running by one day.
    pub fn advance_day(&mut self) -> Vec<(u8, Result<DayOutcome>)> {
        self.tick += 1;
        self.houses
            .iter_mut()
            .map(|(&a, h)| (a, h.step_day()))
            .collect()
    }

    /// Routes one frame. A broadcast reaches every house and is never
    /// answered; a unicast reaches only its house.
    pub fn handle(&mut self, req: &Frame) -> Option<Frame> {
        if req.address == BROADCAST {
            for h in self.houses.values_mut() {
                slave_handle(h, req);
            }
            return None;
        }
        self.houses
            .get_mut(&req.address)
            .and_then(|h| slave_handle(h, req))
    }

    pub fn snapshot(&self) -> CondoSnapshot {
        CondoSnapshot {
            tick: self.tick,
            houses: self.houses.values().cloned().collect(),
        }
    }

    pub fn view(&self, tail: usize) -> CondoView {
        CondoView {
            tick: self.tick,
            houses: self
                .houses
                .values()
                .map(|h| HouseView {
                    address: h.address,
                    flock_id: h.flock_id(),
                    day: h.day(),
                    complete: h.is_complete(),
                    fallback_days: h.fallback_days(),
                    ledger_tail: h.ledger[h.ledger.len().saturating_sub(tail)..].to_vec(),
                })
                .collect(),
        }
    }
}

/// Link faults injected at the gateway, per house.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fault {
    /// Requests to swallow before answering again.
    pub drop_requests: u32,
    /// Replies to corrupt with a single flipped bit.
    pub corrupt_replies: u32,
    /// Swallow every request.
    pub unreachable: bool,
}

type Shared<T> = Arc<Mutex<T>>;

/// A running condominium: gateway listener plus optional tick driver.
pub struct CondoHandle {
    addr: SocketAddr,
    condo: Shared<Condominium>,
    faults: Shared<HashMap<u8, Fault>>,
    stop: watch::Sender<bool>,
    tasks: Vec<JoinHandle<()>>,
}

/// Starts the houses of `cfg` behind a gateway bound to `bind`.
pub async fn run_condominium(cfg: &CondoConfig, bind: &str) -> Result<CondoHandle> {
    let condo = Condominium::new(cfg)?;
    serve(condo, bind, cfg.tick_ms).await
}

/// Resumes a condominium from a snapshot.
pub async fn resume_condominium(
    snapshot: CondoSnapshot,
    bind: &str,
    tick_ms: Option<u64>,
) -> Result<CondoHandle> {
    serve(Condominium::from_snapshot(snapshot)?, bind, tick_ms).await
}

async fn serve(condo: Condominium, bind: &str, tick_ms: Option<u64>) -> Result<CondoHandle> {
    let listener = TcpListener::bind(bind).await?;
    let addr = listener.local_addr()?;
    let condo = Arc::new(Mutex::new(condo));
    let faults: Shared<HashMap<u8, Fault>> = Arc::default();
    let (stop, stop_rx) = watch::channel(false);
    let mut tasks = vec![tokio::spawn(accept_loop(
        listener,
        condo.clone(),
        faults.clone(),
        stop_rx.clone(),
    ))];
    if let Some(ms) = tick_ms {
        tasks.push(tokio::spawn(tick_loop(
            condo.clone(),
            Duration::from_millis(ms.max(1)),
            stop_rx,
        )));
    }
    log::info!("condominium gateway listening on {addr}");
    Ok(CondoHandle {
        addr,
        condo,
        faults,
        stop,
        tasks,
    })
}

async fn tick_loop(condo: Shared<Condominium>, every: Duration, mut stop: watch::Receiver<bool>) {
    let mut timer = tokio::time::interval(every);
    timer.tick().await;
    loop {
        tokio::select! {
            _ = stop.changed() => return,
            _ = timer.tick() => {
                let mut c = condo.lock().expect("condominium lock");
                if c.is_complete() {
                    return;
                }
                c.advance_day();
            }
        }
    }
}

async fn accept_loop(
    listener: TcpListener,
    condo: Shared<Condominium>,
    faults: Shared<HashMap<u8, Fault>>,
    mut stop: watch::Receiver<bool>,
) {
    loop {
        tokio::select! {
            _ = stop.changed() => return,
            conn = listener.accept() => match conn {
                Ok((stream, peer)) => {
                    log::debug!("gateway: master connected from {peer}");
                    tokio::spawn(serve_master(stream, condo.clone(), faults.clone(), stop.clone()));
                }
                Err(e) => log::warn!("gateway accept failed: {e}"),
            }
        }
    }
}

async fn serve_master(
    mut stream: TcpStream,
    condo: Shared<Condominium>,
    faults: Shared<HashMap<u8, Fault>>,
    mut stop: watch::Receiver<bool>,
) {
    let _ = stream.set_nodelay(true);
    loop {
        let req = tokio::select! {
            _ = stop.changed() => return,
            r = read_frame(&mut stream) => match r {
                Ok(Some(f)) => f,
                Ok(None) => return,
                Err(e) => {
                    // framing is lost; the master reconnects
                    log::debug!("gateway: dropping link after bad frame: {e}");
                    return;
                }
            }
        };
        let (swallow, corrupt) = {
            let mut f = faults.lock().expect("fault table");
            match f.get_mut(&req.address) {
                Some(x) if x.unreachable => (true, false),
                Some(x) if x.drop_requests > 0 => {
                    x.drop_requests -= 1;
                    (true, false)
                }
                Some(x) if x.corrupt_replies > 0 => {
                    x.corrupt_replies -= 1;
                    (false, true)
                }
                _ => (false, false),
            }
        };
        if swallow {
            log::debug!("gateway: swallowed {req}");
            continue;
        }
        let reply = condo.lock().expect("condominium lock").handle(&req);
        if let Some(reply) = reply {
            let Ok(mut bytes) = reply.encode() else {
                continue;
            };
            if corrupt {
                let i = bytes.len() / 2;
                bytes[i] ^= 0x10;
            }
            if write_raw(&mut stream, &bytes).await.is_err() {
                return;
            }
        }
    }
}

impl CondoHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn advance_day(&self) -> Vec<(u8, Result<DayOutcome>)> {
        self.condo.lock().expect("condominium lock").advance_day()
    }

    pub fn snapshot(&self) -> CondoSnapshot {
        self.condo.lock().expect("condominium lock").snapshot()
    }

    pub fn view(&self, tail: usize) -> CondoView {
        self.condo.lock().expect("condominium lock").view(tail)
    }

    /// Runs `f` with the condominium locked.
    pub fn with<R>(&self, f: impl FnOnce(&mut Condominium) -> R) -> R {
        f(&mut self.condo.lock().expect("condominium lock"))
    }

    pub fn set_fault(&self, address: u8, fault: Fault) {
        self.faults
            .lock()
            .expect("fault table")
            .insert(address, fault);
    }

    pub fn clear_faults(&self) {
        self.faults.lock().expect("fault table").clear();
    }

    /// Stops the gateway and the tick driver and returns the final state.
    pub async fn stop(self) -> CondoSnapshot {
        let _ = self.stop.send(true);
        for t in self.tasks {
            let _ = t.await;
        }
        self.condo.lock().expect("condominium lock").snapshot()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use aviary_core::dataset::generate_flock;

    fn house(cfg: &GeneratorConfig) -> HouseSim {
        HouseSim::new(1, HouseGeometry::large(), cfg.clone(), 30_000, 5).unwrap()
    }

    #[test]
    fn incremental_matches_whole_flock() {
        for cfg in [
            GeneratorConfig::default().noiseless(),
            GeneratorConfig::default(),
        ] {
            let plans = cfg.specialist_plan(3);
            let whole = generate_flock(&cfg, &plans, HouseGeometry::large(), 30_000, 5).unwrap();
            let mut h = house(&cfg);
            for p in &plans {
                h.set_plan(p).unwrap();
                h.step_day().unwrap();
            }
            assert_eq!(h.sample().unwrap(), whole);
            assert_eq!(h.fallback_days(), 0);
            assert!(matches!(h.step_day(), Err(SimError::FlockComplete)));
        }
    }

    #[test]
    fn missing_plans_fall_back_to_the_default() {
        let cfg = GeneratorConfig::default();
        let mut h = house(&cfg);
        while !h.is_complete() {
            h.step_day().unwrap();
        }
        assert_eq!(h.fallback_days(), 40);
        let whole =
            generate_flock(&cfg, &cfg.comfort_plan(), HouseGeometry::large(), 30_000, 5).unwrap();
        assert_eq!(h.sample().unwrap().outcomes, whole.outcomes);
    }

    #[test]
    fn carried_plan_keeps_the_last_setpoints() {
        let cfg = GeneratorConfig::default();
        let mut h = house(&cfg);
        let p = DayPlan {
            day: 1,
            t_min: 30.0,
            t_avg: 31.0,
            t_max: 32.0,
            h_min: 50.0,
            h_avg: 55.0,
            h_max: 60.0,
        };
        h.set_plan(&p).unwrap();
        h.step_day().unwrap();
        h.step_day().unwrap();
        assert_eq!(h.ledger()[1].plan, DayPlan { day: 2, ..p });
        assert!(h.ledger()[1].fallback);
    }

    #[test]
    fn injected_mortality_lands_on_the_next_day() {
        let cfg = GeneratorConfig::default().noiseless();
        let mut a = house(&cfg);
        let mut b = house(&cfg);
        for _ in 0..12 {
            a.step_day().unwrap();
            b.step_day().unwrap();
        }
        b.record_mortality(&MortalityWrite {
            flock_id: 5,
            day: 12,
            entry_id: 1,
            count: 50,
        })
        .unwrap();
        // a retransmitted entry is not counted twice
        b.record_mortality(&MortalityWrite {
            flock_id: 5,
            day: 12,
            entry_id: 1,
            count: 50,
        })
        .unwrap();
        assert_eq!(
            b.record_mortality(&MortalityWrite {
                flock_id: 5,
                day: 11,
                entry_id: 2,
                count: 1
            }),
            Err(ExceptionCode::IllegalDataValue)
        );
        let (oa, ob) = (a.step_day().unwrap(), b.step_day().unwrap());
        assert_eq!(oa.nlb - ob.nlb, 50);
        assert_eq!(ob.dm - oa.dm, 50);
        assert_eq!(b.ledger()[12].injected_deaths, 50);
    }

    #[test]
    fn config_validation() {
        let mut c = CondoConfig::with_houses(2);
        c.houses[1].address = 1;
        assert!(matches!(
            Condominium::new(&c),
            Err(SimError::AddressCollision(1))
        ));
        c.houses[1].address = 0;
        assert!(matches!(
            Condominium::new(&c),
            Err(SimError::InvalidAddress(0))
        ));
        c.houses.clear();
        assert!(matches!(Condominium::new(&c), Err(SimError::Empty)));
        let d = CondoConfig::default();
        assert_eq!(
            CondoConfig::from_json(&serde_json::to_string(&d).unwrap()).unwrap(),
            d
        );
    }
}
