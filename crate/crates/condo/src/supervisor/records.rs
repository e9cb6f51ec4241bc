//! What the supervisor remembers about flocks, plans and operators. The
//! state is rebuilt by replaying [`StoreEvent`]s, so every field here can
//! be reconstructed after a restart.

use std::collections::BTreeMap;

use aviary_core::planner::{FinalActionPlan, PlannerReport};
use aviary_core::{DayOutcome, DayPlan, FlockSample, HouseGeometry, InitialConditions};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::alarms::AlarmEvent;
use crate::protocol::Telemetry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlockStatus {
    Active,
    Complete,
    RejectedOutlier,
}

/// One day as the console shows it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryView {
    pub day: u32,
    /// The plan the house actually ran; absent on day 0.
    pub plan: Option<DayPlan>,
    pub mdw: f64,
    pub dfc: f64,
    pub dm: u32,
    pub nlb: u32,
    pub dfcpb: f64,
    pub nlbpa: f64,
    pub dmpa: f64,
    pub fcr: Option<f64>,
    pub received_at: DateTime<Utc>,
}

impl TelemetryView {
    pub fn from_wire(
        t: &Telemetry,
        geometry: &HouseGeometry,
        received_at: DateTime<Utc>,
    ) -> Option<Self> {
        let day = t.day();
        let o = DayOutcome::from_raw(day, t.mdw_g(), t.dfc_kg(), t.dm, t.nlb, geometry).ok()?;
        Some(Self {
            day,
            plan: (day > 0).then(|| t.plan.to_plan()),
            mdw: o.mdw,
            dfc: o.dfc,
            dm: o.dm,
            nlb: o.nlb,
            dfcpb: o.dfcpb,
            nlbpa: o.nlbpa,
            dmpa: o.dmpa,
            fcr: (day > 0).then(|| o.fcr().ok()).flatten(),
            received_at,
        })
    }

    pub fn outcome(&self) -> DayOutcome {
        DayOutcome {
            day: self.day,
            mdw: self.mdw,
            dfc: self.dfc,
            dm: self.dm,
            nlb: self.nlb,
            dfcpb: self.dfcpb,
            nlbpa: self.nlbpa,
            dmpa: self.dmpa,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedPlan {
    pub day: u32,
    pub plan: DayPlan,
    /// The distribution that delivered it.
    pub distribution: u64,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MortalityEntry {
    pub entry_id: u32,
    pub day: u32,
    pub count: u32,
    pub operator: String,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlockRecord {
    pub flock_id: u32,
    pub house: u8,
    pub geometry: HouseGeometry,
    pub initial_birds: u32,
    pub initial_conditions: InitialConditions,
    pub started_at: DateTime<Utc>,
    pub status: FlockStatus,
    /// Day 0 first, one entry per day received.
    pub telemetry: Vec<TelemetryView>,
    pub applied_plans: Vec<AppliedPlan>,
    pub mortality: Vec<MortalityEntry>,
    /// The plan record (job id) in force when the flock started.
    pub plan_job: Option<u64>,
    /// Already part of the data the current models were trained on, or
    /// already weighed by an adaptive cycle.
    pub evaluated: bool,
}

impl FlockRecord {
    pub fn last_day(&self) -> Option<u32> {
        self.telemetry.last().map(|t| t.day)
    }

    pub fn latest(&self) -> Option<&TelemetryView> {
        self.telemetry.last()
    }

    pub fn has_plan_for(&self, day: u32) -> bool {
        self.applied_plans.iter().any(|p| p.day == day)
    }

    /// The finished flock as a training sample, built from what the house
    /// reported. `None` until all 40 days are in.
    pub fn sample(&self) -> Option<FlockSample> {
        let days: Vec<&TelemetryView> = self.telemetry.iter().filter(|t| t.day > 0).collect();
        if days.len() != aviary_core::domain::FLOCK_DAYS {
            return None;
        }
        let s = FlockSample {
            flock_id: self.flock_id,
            house: self.geometry,
            initial_birds: self.initial_birds,
            initial_conditions: self.initial_conditions,
            plans: days.iter().map(|t| t.plan).collect::<Option<Vec<_>>>()?,
            outcomes: days.iter().map(|t| t.outcome()).collect(),
        };
        s.validate().ok()?;
        Some(s)
    }

    /// Measured day-40 feed conversion.
    pub fn final_fcr(&self) -> Option<f64> {
        self.telemetry
            .iter()
            .find(|t| t.day == 40)
            .and_then(|t| t.fcr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AckOutcome {
    Acked,
    Failed,
    /// No active flock at that address.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseAck {
    pub address: u8,
    pub flock_id: Option<u32>,
    pub outcome: AckOutcome,
    pub retries: u32,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub id: u64,
    pub day: u32,
    pub plan: DayPlan,
    pub at: DateTime<Utc>,
    pub houses: Vec<HouseAck>,
}

impl DistributionReport {
    pub fn all_acked(&self) -> bool {
        self.houses.iter().all(|h| h.outcome != AckOutcome::Failed)
    }
}

/// An approved plan, the one distributed day by day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub job: u64,
    pub model_version: u64,
    pub plan: FinalActionPlan,
    pub report: PlannerReport,
    pub approved_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub at: DateTime<Utc>,
    pub actor: String,
    pub action: String,
    pub detail: serde_json::Value,
}

/// Everything that changes persistent state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum StoreEvent {
    FlockOpened {
        record: Box<FlockRecord>,
    },
    Telemetry {
        flock_id: u32,
        days: Vec<TelemetryView>,
    },
    Distribution {
        report: DistributionReport,
    },
    Mortality {
        flock_id: u32,
        entry: MortalityEntry,
    },
    FlockStatus {
        flock_id: u32,
        status: FlockStatus,
    },
    FlocksEvaluated {
        flock_ids: Vec<u32>,
    },
    Alarm {
        alarm: AlarmEvent,
    },
    AlarmAcknowledged {
        id: u64,
        by: String,
    },
    PlanApproved {
        record: Box<PlanRecord>,
    },
    ModelsSwapped {
        version: u64,
        trained_on: Vec<u32>,
    },
    Audit {
        entry: AuditEntry,
    },
}

/// The replayed state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub flocks: BTreeMap<u32, FlockRecord>,
    pub distributions: Vec<DistributionReport>,
    pub alarms: Vec<AlarmEvent>,
    pub current_plan: Option<PlanRecord>,
    pub model_version: u64,
    /// Flocks folded into the training data by retrains, in order.
    pub trained_flocks: Vec<u32>,
    pub audit: Vec<AuditEntry>,
    pub next_entry_id: u32,
}

impl Ledger {
    pub fn apply(&mut self, e: &StoreEvent) {
        match e {
            StoreEvent::FlockOpened { record } => {
                self.flocks.insert(record.flock_id, (**record).clone());
            }
            StoreEvent::Telemetry { flock_id, days } => {
                if let Some(f) = self.flocks.get_mut(flock_id) {
                    for d in days {
                        if f.last_day().is_none_or(|last| d.day > last) {
                            f.telemetry.push(d.clone());
                        }
                    }
                }
            }
            StoreEvent::Distribution { report } => {
                for h in report
                    .houses
                    .iter()
                    .filter(|h| h.outcome == AckOutcome::Acked)
                {
                    if let Some(f) = h.flock_id.and_then(|id| self.flocks.get_mut(&id)) {
                        f.applied_plans.retain(|p| p.day != report.day);
                        f.applied_plans.push(AppliedPlan {
                            day: report.day,
                            plan: report.plan,
                            distribution: report.id,
                            at: report.at,
                        });
                    }
                }
                self.distributions.push(report.clone());
            }
            StoreEvent::Mortality { flock_id, entry } => {
                self.next_entry_id = self.next_entry_id.max(entry.entry_id + 1);
                if let Some(f) = self.flocks.get_mut(flock_id) {
                    f.mortality.push(entry.clone());
                }
            }
            StoreEvent::FlockStatus { flock_id, status } => {
                if let Some(f) = self.flocks.get_mut(flock_id) {
                    f.status = *status;
                }
            }
            StoreEvent::FlocksEvaluated { flock_ids } => {
                for id in flock_ids {
                    if let Some(f) = self.flocks.get_mut(id) {
                        f.evaluated = true;
                    }
                }
            }
            StoreEvent::Alarm { alarm } => self.alarms.push(alarm.clone()),
            StoreEvent::AlarmAcknowledged { id, by } => {
                if let Some(a) = self.alarms.iter_mut().find(|a| a.id == *id) {
                    a.acknowledged_by = Some(by.clone());
                }
            }
            StoreEvent::PlanApproved { record } => self.current_plan = Some((**record).clone()),
            StoreEvent::ModelsSwapped {
                version,
                trained_on,
            } => {
                self.model_version = *version;
                self.trained_flocks.extend(trained_on);
            }
            StoreEvent::Audit { entry } => self.audit.push(entry.clone()),
        }
    }

    /// The flock a house is raising now, if any.
    pub fn active_flock(&self, house: u8) -> Option<&FlockRecord> {
        self.flocks
            .values()
            .rev()
            .find(|f| f.house == house && f.status == FlockStatus::Active)
    }

    /// Finished, accepted flocks no adaptive cycle has weighed yet.
    pub fn unevaluated(&self) -> Vec<&FlockRecord> {
        self.flocks
            .values()
            .filter(|f| f.status == FlockStatus::Complete && !f.evaluated)
            .collect()
    }

    pub fn distribution(&self, id: u64) -> Option<&DistributionReport> {
        self.distributions.iter().find(|d| d.id == id)
    }
}
