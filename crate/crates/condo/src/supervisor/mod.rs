//! The supervision service: sends the approved plan to the houses one day
//! at a time, collects telemetry and operator entries, raises alarms,
//! runs optimisation jobs and decides when the surrogates need retraining.
//!
//! All persistent state goes through [`Store`] as events before it becomes
//! visible, so a restart replays to exactly what was committed.

pub mod adaptive;
pub mod alarms;
pub mod api;
pub mod records;
pub mod store;

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use aviary_core::dataset::DatasetError;
use aviary_core::domain::FLOCK_DAYS;
use aviary_core::evolve::{GaConfig, Restrictions};
use aviary_core::planner::{
    optimize_flock, restrictions_from_samples, FinalActionPlan, PlannerError, PlannerReport,
};
use aviary_core::surrogate::{
    load_models, save_models, train_models, Hyperparams, SurrogateError, WeekModel,
};
use aviary_core::{DayPlan, FlockSample};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::payload::telemetry_request;
use crate::protocol::{
    Frame, FunctionCode, Master, MasterConfig, MasterError, MortalityWrite, PayloadError,
    PlanWrite, Status, Telemetry,
};

pub use adaptive::{adaptive_cycle, AdaptiveConfig, AdaptiveOutcome, Decision};
pub use alarms::{
    default_rules, evaluate_alarms, AlarmDedup, AlarmEvent, AlarmRule, Reading, Severity, Variable,
};
pub use records::{
    AckOutcome, AppliedPlan, AuditEntry, DistributionReport, FlockRecord, FlockStatus, HouseAck,
    Ledger, MortalityEntry, PlanRecord, StoreEvent, TelemetryView,
};
pub use store::{JsonlStore, MemoryStore, Store};

#[derive(Debug, Error)]
pub enum SupervisorError {
    #[error("day {0} is outside 1..=40")]
    DayOutOfRange(u32),
    #[error("house {0} has no active flock")]
    NoActiveFlock(u8),
    #[error("house {house} is on day {expected}; entries for day {got} are closed")]
    StaleDay { house: u8, expected: u32, got: u32 },
    #[error("house {0} is not supervised")]
    UnknownHouse(u8),
    #[error("no job {0}")]
    UnknownJob(u64),
    #[error("job {0} has not produced a plan")]
    JobNotReady(u64),
    #[error("no flock {0}")]
    UnknownFlock(u32),
    #[error("no approved plan")]
    NoPlan,
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Link(#[from] MasterError),
    #[error(transparent)]
    Payload(#[from] PayloadError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error("store: {0}")]
    Store(#[from] std::io::Error),
}

pub type Result<T, E = SupervisorError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupervisorConfig {
    /// Addresses of the supervised houses.
    pub houses: Vec<u8>,
    #[serde(default)]
    pub master: MasterConfig,
    #[serde(default = "default_rules")]
    pub alarm_rules: Vec<AlarmRule>,
    #[serde(default = "default_alarm_window")]
    pub alarm_window_s: u64,
    #[serde(default)]
    pub adaptive: AdaptiveConfig,
    /// Run the adaptive cycle, and retrain if it says so, whenever a flock
    /// finishes.
    #[serde(default = "yes")]
    pub auto_adapt: bool,
    #[serde(default)]
    pub ga: GaConfig,
    #[serde(default)]
    pub hyperparams: Hyperparams,
    /// Retrained model sets are written to `<dir>/v<version>`.
    #[serde(default)]
    pub model_dir: Option<PathBuf>,
}

fn default_alarm_window() -> u64 {
    3600
}

fn yes() -> bool {
    true
}

impl SupervisorConfig {
    pub fn new(houses: Vec<u8>) -> Self {
        Self {
            houses,
            master: MasterConfig::default(),
            alarm_rules: default_rules(),
            alarm_window_s: default_alarm_window(),
            adaptive: AdaptiveConfig::default(),
            auto_adapt: true,
            ga: GaConfig::default(),
            hyperparams: Hyperparams::default(),
            model_dir: None,
        }
    }
}

/// Surrogates together with the flocks they were trained on.
#[derive(Debug, Clone, Serialize)]
pub struct ModelSet {
    pub version: u64,
    #[serde(skip)]
    pub models: Vec<WeekModel>,
    #[serde(skip)]
    pub restrictions: Vec<Restrictions>,
    #[serde(skip)]
    pub history: Vec<FlockSample>,
    pub trained_on: usize,
    pub created_at: DateTime<Utc>,
}

impl ModelSet {
    pub fn new(version: u64, models: Vec<WeekModel>, history: Vec<FlockSample>) -> Result<Self> {
        let restrictions = restrictions_from_samples(&history)?;
        Ok(Self {
            version,
            models,
            restrictions,
            trained_on: history.len(),
            history,
            created_at: Utc::now(),
        })
    }
}

/// Holds the model set in use. Readers take a cheap `Arc`; a retrain
/// replaces the whole set at once.
#[derive(Debug)]
pub struct ModelRegistry {
    current: RwLock<Arc<ModelSet>>,
}

impl ModelRegistry {
    pub fn new(set: ModelSet) -> Self {
        Self {
            current: RwLock::new(Arc::new(set)),
        }
    }

    pub fn current(&self) -> Arc<ModelSet> {
        self.current.read().expect("model registry").clone()
    }

    pub fn swap(&self, set: ModelSet) -> Arc<ModelSet> {
        let set = Arc::new(set);
        *self.current.write().expect("model registry") = set.clone();
        set
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Optimize,
    Retrain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JobProgress {
    pub week: Option<u8>,
    pub generation: usize,
    pub best_fitness: Option<f64>,
    pub weeks_done: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Job {
    pub id: u64,
    pub kind: JobKind,
    pub state: JobState,
    pub progress: JobProgress,
    pub model_version: u64,
    pub created_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    pub error: Option<String>,
    pub plan: Option<FinalActionPlan>,
    pub report: Option<PlannerReport>,
}

/// What one house said on its last poll.
#[derive(Debug, Clone, Serialize)]
pub struct HouseSummary {
    pub address: u8,
    pub reachable: bool,
    pub last_contact: Option<DateTime<Utc>>,
    pub status: Option<Status>,
    pub flock_id: Option<u32>,
    pub flock_status: Option<FlockStatus>,
    pub latest: Option<TelemetryView>,
    pub open_alarms: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MortalityAck {
    pub entry: MortalityEntry,
    pub flock_id: u32,
    pub telemetry: Option<TelemetryView>,
    /// Living birds once the house has applied the entry at its next step.
    pub projected_nlb: Option<u32>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlockReport {
    pub record: FlockRecord,
    pub plan: Option<PlanRecord>,
    pub measured_fcr: Option<f64>,
    /// Surrogate estimate of the plan that was distributed.
    pub fcr_res: Option<f64>,
    /// `(measured − fcr_res) / fcr_res`, %.
    pub deviation_pct: Option<f64>,
    pub fallback_days: Vec<u32>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SyncReport {
    pub new_days: BTreeMap<u8, Vec<u32>>,
    pub opened: Vec<u32>,
    pub completed: Vec<u32>,
    pub unreachable: Vec<u8>,
    pub alarms: Vec<AlarmEvent>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct StepReport {
    pub sync: SyncReport,
    pub distributions: Vec<DistributionReport>,
    pub adaptive: Option<AdaptiveOutcome>,
    pub retrain_job: Option<u64>,
}

#[derive(Debug, Clone, Copy)]
struct Contact {
    status: Option<Status>,
    at: DateTime<Utc>,
    reachable: bool,
}

pub struct Supervisor {
    cfg: SupervisorConfig,
    master: Master,
    store: Mutex<Box<dyn Store>>,
    ledger: RwLock<Ledger>,
    registry: ModelRegistry,
    jobs: Mutex<BTreeMap<u64, Job>>,
    next_job: AtomicU64,
    next_alarm: AtomicU64,
    next_distribution: AtomicU64,
    dedup: Mutex<AlarmDedup>,
    contacts: Mutex<HashMap<u8, Contact>>,
    /// One mutating operation at a time: keeps the ledger and the houses
    /// in step even when the API and the poll loop race.
    op: tokio::sync::Mutex<()>,
}

impl Supervisor {
    /// Starts the service against the condominium gateway at `endpoint`.
    /// `models` and `history` are the initial surrogates and the flocks they
    /// were trained on; if the store records a later retrain whose files
    /// are in `cfg.model_dir`, those are used instead.
    pub fn open(
        cfg: SupervisorConfig,
        endpoint: SocketAddr,
        models: Vec<WeekModel>,
        history: Vec<FlockSample>,
        store: Box<dyn Store>,
    ) -> Result<Arc<Self>> {
        if cfg.houses.is_empty() {
            return Err(SupervisorError::Invalid("no houses to supervise".into()));
        }
        let mut ledger = Ledger::default();
        for e in store.replay()? {
            ledger.apply(&e);
        }
        let mut set = ModelSet::new(0, models, history.clone())?;
        if ledger.model_version > 0 {
            match &cfg.model_dir {
                Some(dir) => {
                    let models = load_models(dir.join(format!("v{}", ledger.model_version)))?;
                    let mut h = history;
                    h.extend(
                        ledger
                            .trained_flocks
                            .iter()
                            .filter_map(|id| ledger.flocks.get(id)?.sample()),
                    );
                    set = ModelSet::new(ledger.model_version, models, h)?;
                }
                None => log::warn!(
                    "store records model version {} but no model directory is configured",
                    ledger.model_version
                ),
            }
        }
        let next_job = ledger.current_plan.as_ref().map_or(1, |p| p.job + 1);
        let next_alarm = ledger.alarms.iter().map(|a| a.id + 1).max().unwrap_or(1);
        let next_distribution = ledger
            .distributions
            .iter()
            .map(|d| d.id + 1)
            .max()
            .unwrap_or(1);
        Ok(Arc::new(Self {
            master: Master::new(endpoint, cfg.master.clone()),
            dedup: Mutex::new(AlarmDedup::new(std::time::Duration::from_secs(
                cfg.alarm_window_s,
            ))),
            cfg,
            store: Mutex::new(store),
            ledger: RwLock::new(ledger),
            registry: ModelRegistry::new(set),
            jobs: Mutex::new(BTreeMap::new()),
            next_job: AtomicU64::new(next_job),
            next_alarm: AtomicU64::new(next_alarm),
            next_distribution: AtomicU64::new(next_distribution),
            contacts: Mutex::new(HashMap::new()),
            op: tokio::sync::Mutex::new(()),
        }))
    }

    pub fn config(&self) -> &SupervisorConfig {
        &self.cfg
    }

    pub fn master(&self) -> &Master {
        &self.master
    }

    pub fn models(&self) -> Arc<ModelSet> {
        self.registry.current()
    }

    /// A copy of the replayed state.
    pub fn ledger(&self) -> Ledger {
        self.ledger.read().expect("ledger").clone()
    }

    fn read<T>(&self, f: impl FnOnce(&Ledger) -> T) -> T {
        f(&self.ledger.read().expect("ledger"))
    }

    fn commit(&self, events: Vec<StoreEvent>) -> Result<()> {
        let mut store = self.store.lock().expect("store");
        let mut ledger = self.ledger.write().expect("ledger");
        for e in &events {
            store.append(e)?;
            ledger.apply(e);
        }
        Ok(())
    }

    fn audit(actor: &str, action: &str, detail: serde_json::Value) -> StoreEvent {
        StoreEvent::Audit {
            entry: AuditEntry {
                at: Utc::now(),
                actor: actor.into(),
                action: action.into(),
                detail,
            },
        }
    }

    fn check_house(&self, house: u8) -> Result<()> {
        if self.cfg.houses.contains(&house) {
            Ok(())
        } else {
            Err(SupervisorError::UnknownHouse(house))
        }
    }

    fn raise(&self, readings: &[Reading<'_>]) -> Result<Vec<AlarmEvent>> {
        let mut fired = evaluate_alarms(
            readings,
            &self.cfg.alarm_rules,
            &mut self.dedup.lock().expect("dedup"),
            Utc::now(),
        );
        for a in &mut fired {
            a.id = self.next_alarm.fetch_add(1, Ordering::Relaxed);
            log::warn!("alarm {}: {}", a.id, a.message);
        }
        self.commit(
            fired
                .iter()
                .map(|a| StoreEvent::Alarm { alarm: a.clone() })
                .collect(),
        )?;
        Ok(fired)
    }

    fn contact(&self, house: u8, status: Option<Status>) {
        let mut c = self.contacts.lock().expect("contacts");
        let prev = c.get(&house).and_then(|c| c.status);
        c.insert(
            house,
            Contact {
                status: status.or(prev),
                at: Utc::now(),
                reachable: status.is_some(),
            },
        );
    }

    async fn status(&self, house: u8) -> Result<Status> {
        let t = self
            .master
            .transact(&Frame::new(house, FunctionCode::ReportStatus, vec![]))
            .await?;
        Ok(Status::decode(&t.reply.payload)?)
    }

    /// Sends day `day` of `plan` to every house raising a flock.
    pub async fn distribute_daily_plan(
        &self,
        day: u32,
        plan: &FinalActionPlan,
    ) -> Result<DistributionReport> {
        let _op = self.op.lock().await;
        self.distribute_locked(day, plan).await
    }

    async fn distribute_locked(
        &self,
        day: u32,
        plan: &FinalActionPlan,
    ) -> Result<DistributionReport> {
        if !(1..=FLOCK_DAYS as u32).contains(&day) {
            return Err(SupervisorError::DayOutOfRange(day));
        }
        let day_plan: DayPlan = *plan
            .day_plans()
            .get(day as usize - 1)
            .ok_or_else(|| SupervisorError::Invalid(format!("plan has no day {day}")))?;
        // what the house will hold after fixed-point transmission
        let sent = PlanWrite::new(0, &day_plan)?.plan.to_plan();
        let mut houses = Vec::new();
        let mut down = Vec::new();
        for &address in &self.cfg.houses {
            let flock = self.read(|l| l.active_flock(address).map(|f| f.flock_id));
            let Some(flock_id) = flock else {
                houses.push(HouseAck {
                    address,
                    flock_id: None,
                    outcome: AckOutcome::Skipped,
                    retries: 0,
                    error: None,
                });
                continue;
            };
            let req = Frame::new(
                address,
                FunctionCode::WriteDayPlan,
                PlanWrite::new(flock_id, &day_plan)?.encode(),
            );
            let ack = match self.master.transact(&req).await {
                Ok(t) => HouseAck {
                    address,
                    flock_id: Some(flock_id),
                    outcome: AckOutcome::Acked,
                    retries: t.retries,
                    error: None,
                },
                Err(e) => {
                    let retries = match &e {
                        MasterError::Timeout { attempts, .. }
                        | MasterError::Corrupt { attempts, .. }
                        | MasterError::Link { attempts, .. } => attempts - 1,
                        _ => 0,
                    };
                    log::error!("day {day} plan to house {address}: {e}");
                    down.push((address, flock_id));
                    HouseAck {
                        address,
                        flock_id: Some(flock_id),
                        outcome: AckOutcome::Failed,
                        retries,
                        error: Some(e.to_string()),
                    }
                }
            };
            houses.push(ack);
        }
        let report = DistributionReport {
            id: self.next_distribution.fetch_add(1, Ordering::Relaxed),
            day,
            plan: sent,
            at: Utc::now(),
            houses,
        };
        self.commit(vec![StoreEvent::Distribution {
            report: report.clone(),
        }])?;
        let readings: Vec<Reading<'_>> = down
            .iter()
            .map(|&(house, f)| Reading::LinkDown {
                house,
                flock_id: Some(f),
            })
            .collect();
        self.raise(&readings)?;
        Ok(report)
    }

    /// Polls every house, opening records for new flocks, backfilling
    /// missed days and closing finished flocks.
    pub async fn sync(&self) -> Result<SyncReport> {
        let _op = self.op.lock().await;
        self.sync_locked().await
    }

    async fn sync_locked(&self) -> Result<SyncReport> {
        let mut rep = SyncReport::default();
        for &house in &self.cfg.houses {
            if let Err(e) = self.sync_house(house, &mut rep).await {
                match e {
                    SupervisorError::Link(e) => {
                        log::error!("house {house}: {e}");
                        self.contact(house, None);
                        rep.unreachable.push(house);
                        let flock_id = self.read(|l| l.active_flock(house).map(|f| f.flock_id));
                        rep.alarms
                            .extend(self.raise(&[Reading::LinkDown { house, flock_id }])?);
                    }
                    other => return Err(other),
                }
            }
        }
        Ok(rep)
    }

    async fn sync_house(&self, house: u8, rep: &mut SyncReport) -> Result<()> {
        let st = self.status(house).await?;
        self.contact(house, Some(st));
        let known = self.read(|l| l.flocks.get(&st.flock_id).cloned());
        let record = match known {
            Some(r) => r,
            None => {
                let r = FlockRecord {
                    flock_id: st.flock_id,
                    house,
                    geometry: st.geometry(),
                    initial_birds: st.initial_birds,
                    initial_conditions: st.initial_conditions(),
                    started_at: Utc::now(),
                    status: FlockStatus::Active,
                    telemetry: vec![],
                    applied_plans: vec![],
                    mortality: vec![],
                    plan_job: self.read(|l| l.current_plan.as_ref().map(|p| p.job)),
                    evaluated: false,
                };
                self.commit(vec![StoreEvent::FlockOpened {
                    record: Box::new(r.clone()),
                }])?;
                rep.opened.push(r.flock_id);
                r
            }
        };
        if record.status != FlockStatus::Active {
            return Ok(());
        }
        let from = record.last_day().map_or(0, |d| d + 1);
        let mut views = Vec::new();
        for day in from..=u32::from(st.day) {
            let t = self
                .master
                .transact(&Frame::new(
                    house,
                    FunctionCode::ReadTelemetry,
                    telemetry_request(Some(day))?,
                ))
                .await?;
            let tel = Telemetry::decode(&t.reply.payload)?;
            if tel.flock_id != record.flock_id || tel.day() != day {
                return Err(MasterError::ProtocolViolation(format!(
                    "asked house {house} for flock {} day {day}, got flock {} day {}",
                    record.flock_id,
                    tel.flock_id,
                    tel.day()
                ))
                .into());
            }
            let v =
                TelemetryView::from_wire(&tel, &record.geometry, Utc::now()).ok_or_else(|| {
                    SupervisorError::Invalid(format!(
                        "house {house} day {day}: implausible telemetry"
                    ))
                })?;
            views.push(v);
        }
        if !views.is_empty() {
            self.commit(vec![StoreEvent::Telemetry {
                flock_id: record.flock_id,
                days: views.clone(),
            }])?;
            rep.new_days
                .insert(house, views.iter().map(|v| v.day).collect());
            let readings: Vec<Reading<'_>> = views
                .iter()
                .filter(|v| v.day > 0)
                .map(|view| Reading::Telemetry {
                    house,
                    flock_id: record.flock_id,
                    view,
                })
                .collect();
            rep.alarms.extend(self.raise(&readings)?);
        }
        if st.complete {
            let complete = self.read(|l| {
                l.flocks
                    .get(&record.flock_id)
                    .and_then(|f| f.sample())
                    .is_some()
            });
            if complete {
                self.commit(vec![StoreEvent::FlockStatus {
                    flock_id: record.flock_id,
                    status: FlockStatus::Complete,
                }])?;
                rep.completed.push(record.flock_id);
                log::info!("flock {} in house {house} finished", record.flock_id);
            }
        }
        Ok(())
    }

    /// Distributes tomorrow's set-points of the approved plan to every
    /// house that does not have them yet.
    pub async fn distribute_next(&self) -> Result<Vec<DistributionReport>> {
        let _op = self.op.lock().await;
        self.distribute_next_locked().await
    }

    async fn distribute_next_locked(&self) -> Result<Vec<DistributionReport>> {
        let Some(plan) = self.read(|l| l.current_plan.clone()) else {
            return Ok(vec![]);
        };
        let due: std::collections::BTreeSet<u32> = self.read(|l| {
            self.cfg
                .houses
                .iter()
                .filter_map(|&h| l.active_flock(h))
                .filter_map(|f| {
                    let next = f.last_day().map_or(1, |d| d + 1);
                    (next as usize <= FLOCK_DAYS && !f.has_plan_for(next)).then_some(next)
                })
                .collect()
        });
        let mut out = Vec::new();
        for day in due {
            out.push(self.distribute_locked(day, &plan.plan).await?);
        }
        Ok(out)
    }

    /// One supervision round: poll, hand out the next day's set-points and,
    /// when a flock has finished, run the adaptive cycle.
    pub async fn step(self: &Arc<Self>) -> Result<StepReport> {
        let _op = self.op.lock().await;
        let sync = self.sync_locked().await?;
        let distributions = self.distribute_next_locked().await?;
        let mut rep = StepReport {
            sync,
            distributions,
            ..StepReport::default()
        };
        if self.cfg.auto_adapt && !rep.sync.completed.is_empty() {
            let outcome = self.adaptive_check_locked()?;
            if outcome.decision == Decision::Retrain {
                rep.retrain_job = Some(self.start_retrain(outcome.accepted.clone()));
            }
            rep.adaptive = Some(outcome);
        }
        Ok(rep)
    }

    /// Operator mortality count for the day the house is on.
    pub async fn record_mortality(
        &self,
        house: u8,
        day: u32,
        count: u32,
        operator: &str,
    ) -> Result<MortalityAck> {
        self.check_house(house)?;
        let _op = self.op.lock().await;
        let st = self.status(house).await?;
        self.contact(house, Some(st));
        let flock = self
            .read(|l| l.active_flock(house).cloned())
            .filter(|f| f.flock_id == st.flock_id && !st.complete);
        let Some(flock) = flock else {
            return Err(SupervisorError::NoActiveFlock(house));
        };
        if day != u32::from(st.day) {
            return Err(SupervisorError::StaleDay {
                house,
                expected: u32::from(st.day),
                got: day,
            });
        }
        let entry = MortalityEntry {
            entry_id: self.read(|l| l.next_entry_id.max(1)),
            day,
            count,
            operator: operator.to_string(),
            at: Utc::now(),
        };
        if count > 0 {
            let w = MortalityWrite {
                flock_id: flock.flock_id,
                day: day as u16,
                entry_id: entry.entry_id,
                count,
            };
            self.master
                .transact(&Frame::new(house, FunctionCode::WriteMortality, w.encode()))
                .await?;
        }
        let detail = serde_json::json!({ "house": house, "flock_id": flock.flock_id, "day": day, "count": count, "entry_id": entry.entry_id });
        let mut events = vec![Self::audit(operator, "record_mortality", detail)];
        if count > 0 {
            events.insert(
                0,
                StoreEvent::Mortality {
                    flock_id: flock.flock_id,
                    entry: entry.clone(),
                },
            );
        }
        self.commit(events)?;
        let telemetry = flock.latest().cloned();
        Ok(MortalityAck {
            projected_nlb: telemetry.as_ref().map(|t| t.nlb.saturating_sub(count)),
            entry,
            flock_id: flock.flock_id,
            telemetry,
        })
    }

    /// Weighs the finished flocks that no cycle has looked at yet.
    pub async fn adaptive_check(&self) -> Result<AdaptiveOutcome> {
        let _op = self.op.lock().await;
        self.adaptive_check_locked()
    }

    fn adaptive_check_locked(&self) -> Result<AdaptiveOutcome> {
        let set = self.registry.current();
        let new: Vec<FlockSample> =
            self.read(|l| l.unevaluated().iter().filter_map(|f| f.sample()).collect());
        let out = adaptive_cycle(&new, &set.history, &set.models, &self.cfg.adaptive)?;
        log::info!("adaptive cycle: {:?} ({})", out.decision, out.reason);
        let mut events: Vec<StoreEvent> = out
            .rejected
            .iter()
            .map(|r| StoreEvent::FlockStatus {
                flock_id: r.flock_id,
                status: FlockStatus::RejectedOutlier,
            })
            .collect();
        if out.evaluated {
            events.push(StoreEvent::FlocksEvaluated {
                flock_ids: out.accepted.clone(),
            });
        }
        events.push(Self::audit(
            "supervisor",
            "adaptive_cycle",
            serde_json::to_value(&out).unwrap_or_default(),
        ));
        self.commit(events)?;
        Ok(out)
    }

    fn new_job(&self, kind: JobKind) -> u64 {
        let id = self.next_job.fetch_add(1, Ordering::Relaxed);
        self.jobs.lock().expect("jobs").insert(
            id,
            Job {
                id,
                kind,
                state: JobState::Running,
                progress: JobProgress::default(),
                model_version: self.registry.current().version,
                created_at: Utc::now(),
                finished_at: None,
                error: None,
                plan: None,
                report: None,
            },
        );
        id
    }

    fn update_job(&self, id: u64, f: impl FnOnce(&mut Job)) {
        if let Some(j) = self.jobs.lock().expect("jobs").get_mut(&id) {
            f(j);
        }
    }

    fn finish_job<T>(&self, id: u64, r: &Result<T>) {
        self.update_job(id, |j| {
            j.finished_at = Some(Utc::now());
            match r {
                Ok(_) => j.state = JobState::Succeeded,
                Err(e) => {
                    j.state = JobState::Failed;
                    j.error = Some(e.to_string());
                }
            }
        });
    }

    pub fn job(&self, id: u64) -> Result<Job> {
        self.jobs
            .lock()
            .expect("jobs")
            .get(&id)
            .cloned()
            .ok_or(SupervisorError::UnknownJob(id))
    }

    pub fn jobs(&self) -> Vec<Job> {
        self.jobs.lock().expect("jobs").values().cloned().collect()
    }

    /// Starts a planner run on a blocking thread and returns its job id.
    /// Must be called from within a tokio runtime.
    pub fn start_optimize(self: &Arc<Self>, ga: Option<GaConfig>) -> Result<u64> {
        let ga = ga.unwrap_or_else(|| self.cfg.ga.clone());
        ga.validate()
            .map_err(|e| SupervisorError::Invalid(e.to_string()))?;
        let id = self.new_job(JobKind::Optimize);
        let me = self.clone();
        tokio::task::spawn_blocking(move || {
            let set = me.registry.current();
            let mut last_week = None;
            let r = optimize_flock(&set.models, &set.restrictions, &ga, |p| {
                let w = p.week.index();
                let turned = last_week.is_some_and(|l| l != w);
                last_week = Some(w);
                if turned || p.stats.generation % 10 == 0 {
                    me.update_job(id, |j| {
                        if turned {
                            j.progress.weeks_done += 1;
                        }
                        j.progress.week = Some(w);
                        j.progress.generation = p.stats.generation;
                        j.progress.best_fitness = Some(p.stats.best);
                    });
                }
            })
            .map_err(SupervisorError::from);
            me.finish_job(id, &r);
            if let Ok((plan, report)) = r {
                log::info!("job {id}: FCR_res {:.4}", plan.fcr_res);
                me.update_job(id, |j| {
                    j.progress.weeks_done = 6;
                    j.plan = Some(plan);
                    j.report = Some(report);
                });
            }
        });
        Ok(id)
    }

    /// Makes a finished job's plan the one distributed from now on and
    /// sends out what is due.
    pub async fn approve(
        &self,
        job_id: u64,
        actor: &str,
    ) -> Result<(PlanRecord, Vec<DistributionReport>)> {
        let job = self.job(job_id)?;
        let (Some(plan), Some(report)) = (job.plan, job.report) else {
            return Err(SupervisorError::JobNotReady(job_id));
        };
        let record = PlanRecord {
            job: job_id,
            model_version: job.model_version,
            plan,
            report,
            approved_at: Utc::now(),
        };
        self.install_plan(record, actor).await
    }

    /// Approves a plan computed elsewhere, for example by the CLI.
    pub async fn install_plan(
        &self,
        mut record: PlanRecord,
        actor: &str,
    ) -> Result<(PlanRecord, Vec<DistributionReport>)> {
        record.plan.validate()?;
        let _op = self.op.lock().await;
        record.approved_at = Utc::now();
        let detail = serde_json::json!({ "job": record.job, "fcr_res": record.plan.fcr_res, "model_version": record.model_version });
        self.commit(vec![
            StoreEvent::PlanApproved {
                record: Box::new(record.clone()),
            },
            Self::audit(actor, "approve_plan", detail),
        ])?;
        let sent = self.distribute_next_locked().await?;
        Ok((record, sent))
    }

    /// Retrains on the history plus `flocks` and swaps the new set in.
    pub fn start_retrain(self: &Arc<Self>, flocks: Vec<u32>) -> u64 {
        let id = self.new_job(JobKind::Retrain);
        let me = self.clone();
        tokio::task::spawn_blocking(move || {
            let r = me.retrain(&flocks);
            me.finish_job(id, &r);
            if let Ok(v) = r {
                me.update_job(id, |j| j.model_version = v);
            }
        });
        id
    }

    /// Blocking retrain; returns the new model version.
    pub fn retrain(&self, flocks: &[u32]) -> Result<u64> {
        let current = self.registry.current();
        let mut data = current.history.clone();
        let added: Vec<FlockSample> = self.read(|l| {
            flocks
                .iter()
                .filter_map(|id| l.flocks.get(id)?.sample())
                .collect()
        });
        if added.len() != flocks.len() {
            return Err(SupervisorError::Invalid(
                "retrain asked for flocks that are not complete".into(),
            ));
        }
        data.extend(added);
        let models = train_models(&data, &self.cfg.hyperparams)?;
        let version = current.version + 1;
        if let Some(dir) = &self.cfg.model_dir {
            save_models(&models, dir.join(format!("v{version}")))?;
        }
        let set = ModelSet::new(version, models, data)?;
        self.commit(vec![
            StoreEvent::ModelsSwapped {
                version,
                trained_on: flocks.to_vec(),
            },
            Self::audit(
                "supervisor",
                "retrain",
                serde_json::json!({ "version": version, "flocks": flocks }),
            ),
        ])?;
        self.registry.swap(set);
        log::info!("models v{version} in service");
        Ok(version)
    }

    pub fn houses(&self) -> Vec<HouseSummary> {
        let contacts = self.contacts.lock().expect("contacts").clone();
        self.read(|l| {
            self.cfg
                .houses
                .iter()
                .map(|&address| {
                    let c = contacts.get(&address);
                    let flock = l
                        .active_flock(address)
                        .or_else(|| l.flocks.values().rev().find(|f| f.house == address));
                    HouseSummary {
                        address,
                        reachable: c.is_some_and(|c| c.reachable),
                        last_contact: c.map(|c| c.at),
                        status: c.and_then(|c| c.status),
                        flock_id: flock.map(|f| f.flock_id),
                        flock_status: flock.map(|f| f.status),
                        latest: flock.and_then(|f| f.latest().cloned()),
                        open_alarms: l
                            .alarms
                            .iter()
                            .filter(|a| a.house == address && a.acknowledged_by.is_none())
                            .count(),
                    }
                })
                .collect()
        })
    }

    /// Telemetry of the house's current (or last) flock received within
    /// `[from, to]`.
    pub fn telemetry(
        &self,
        house: u8,
        from: Option<DateTime<Utc>>,
        to: Option<DateTime<Utc>>,
    ) -> Result<Vec<TelemetryView>> {
        self.check_house(house)?;
        self.read(|l| {
            let f = l
                .active_flock(house)
                .or_else(|| l.flocks.values().rev().find(|f| f.house == house))
                .ok_or(SupervisorError::NoActiveFlock(house))?;
            Ok(f.telemetry
                .iter()
                .filter(|t| {
                    from.is_none_or(|a| t.received_at >= a) && to.is_none_or(|b| t.received_at <= b)
                })
                .cloned()
                .collect())
        })
    }

    pub fn current_plan(&self) -> Option<PlanRecord> {
        self.read(|l| l.current_plan.clone())
    }

    pub fn alarms(&self) -> Vec<AlarmEvent> {
        self.read(|l| l.alarms.clone())
    }

    pub fn acknowledge_alarm(&self, id: u64, by: &str) -> Result<AlarmEvent> {
        if !self.read(|l| l.alarms.iter().any(|a| a.id == id)) {
            return Err(SupervisorError::Invalid(format!("no alarm {id}")));
        }
        self.commit(vec![StoreEvent::AlarmAcknowledged { id, by: by.into() }])?;
        Ok(self
            .read(|l| l.alarms.iter().find(|a| a.id == id).cloned())
            .expect("just checked"))
    }

    pub fn flock_report(&self, flock_id: u32) -> Result<FlockReport> {
        self.read(|l| {
            let record = l
                .flocks
                .get(&flock_id)
                .cloned()
                .ok_or(SupervisorError::UnknownFlock(flock_id))?;
            let plan = (!record.applied_plans.is_empty())
                .then(|| l.current_plan.clone())
                .flatten();
            let measured = record.final_fcr();
            let fcr_res = plan.as_ref().map(|p| p.plan.fcr_res);
            let fallback_days = (1..=record.last_day().unwrap_or(0))
                .filter(|d| !record.has_plan_for(*d))
                .collect();
            Ok(FlockReport {
                deviation_pct: measured.zip(fcr_res).map(|(m, r)| 100.0 * (m - r) / r),
                measured_fcr: measured,
                fcr_res,
                plan,
                fallback_days,
                record,
            })
        })
    }
}
