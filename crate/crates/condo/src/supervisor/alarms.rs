//! Threshold alarms on telemetry and link health.

use std::collections::HashMap;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::records::TelemetryView;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    TMin,
    TAvg,
    TMax,
    HMin,
    HAvg,
    HMax,
    Mdw,
    Dm,
    Dmpa,
    Nlbpa,
    Fcr,
    /// 1 when a house stopped answering, 0 otherwise.
    Link,
}

impl Variable {
    pub fn read(self, t: &TelemetryView) -> Option<f64> {
        let p = t.plan;
        match self {
            Self::TMin => p.map(|p| p.t_min),
            Self::TAvg => p.map(|p| p.t_avg),
            Self::TMax => p.map(|p| p.t_max),
            Self::HMin => p.map(|p| p.h_min),
            Self::HAvg => p.map(|p| p.h_avg),
            Self::HMax => p.map(|p| p.h_max),
            Self::Mdw => Some(t.mdw),
            Self::Dm => Some(f64::from(t.dm)),
            Self::Dmpa => Some(t.dmpa),
            Self::Nlbpa => Some(t.nlbpa),
            Self::Fcr => t.fcr,
            Self::Link => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmRule {
    pub id: String,
    pub variable: Variable,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub severity: Severity,
}

impl AlarmRule {
    pub fn violated_by(&self, v: f64) -> bool {
        self.lower.is_some_and(|lo| v < lo) || self.upper.is_some_and(|hi| v > hi)
    }
}

/// Rules used when the configuration names none.
pub fn default_rules() -> Vec<AlarmRule> {
    let rule = |id: &str, variable, lower, upper, severity| AlarmRule {
        id: id.into(),
        variable,
        lower,
        upper,
        severity,
    };
    vec![
        rule("heat", Variable::TMax, None, Some(35.0), Severity::High),
        rule("cold", Variable::TMin, Some(18.0), None, Severity::Medium),
        rule("humid", Variable::HMax, None, Some(90.0), Severity::Medium),
        rule("dry", Variable::HMin, Some(35.0), None, Severity::Low),
        // roughly 0.3 % of a full house in one day
        rule(
            "mortality",
            Variable::Dmpa,
            None,
            Some(0.05),
            Severity::High,
        ),
        rule("link", Variable::Link, None, Some(0.5), Severity::High),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmEvent {
    pub id: u64,
    pub at: DateTime<Utc>,
    pub house: u8,
    pub flock_id: Option<u32>,
    pub rule: String,
    pub variable: Variable,
    pub value: f64,
    pub severity: Severity,
    pub message: String,
    pub acknowledged_by: Option<String>,
}

/// Suppresses repeats of the same (rule, house) violation inside a window.
#[derive(Debug, Clone)]
pub struct AlarmDedup {
    window: Duration,
    last: HashMap<(String, u8), DateTime<Utc>>,
}

impl AlarmDedup {
    pub fn new(window: std::time::Duration) -> Self {
        Self {
            window: Duration::from_std(window).unwrap_or(Duration::MAX),
            last: HashMap::new(),
        }
    }

    fn admit(&mut self, rule: &str, house: u8, now: DateTime<Utc>) -> bool {
        let key = (rule.to_string(), house);
        match self.last.get(&key) {
            Some(&t) if now - t < self.window => false,
            _ => {
                self.last.insert(key, now);
                true
            }
        }
    }
}

/// One value to check: a house, its flock and the reading.
#[derive(Debug, Clone, Copy)]
pub enum Reading<'a> {
    Telemetry {
        house: u8,
        flock_id: u32,
        view: &'a TelemetryView,
    },
    LinkDown {
        house: u8,
        flock_id: Option<u32>,
    },
}

/// Checks readings against the rules. Ids are left at zero for the caller
/// to assign when it stores the events.
pub fn evaluate_alarms(
    readings: &[Reading<'_>],
    rules: &[AlarmRule],
    dedup: &mut AlarmDedup,
    now: DateTime<Utc>,
) -> Vec<AlarmEvent> {
    let mut out = Vec::new();
    for r in readings {
        for rule in rules {
            let (house, flock_id, value) = match (*r, rule.variable) {
                (Reading::LinkDown { house, flock_id }, Variable::Link) => (house, flock_id, 1.0),
                (
                    Reading::Telemetry {
                        house,
                        flock_id,
                        view,
                    },
                    v,
                ) => match v.read(view) {
                    Some(x) => (house, Some(flock_id), x),
                    None => continue,
                },
                _ => continue,
            };
            if !rule.violated_by(value) || !dedup.admit(&rule.id, house, now) {
                continue;
            }
            let day = match r {
                Reading::Telemetry { view, .. } => format!(" on day {}", view.day),
                Reading::LinkDown { .. } => String::new(),
            };
            out.push(AlarmEvent {
                id: 0,
                at: now,
                house,
                flock_id,
                rule: rule.id.clone(),
                variable: rule.variable,
                value,
                severity: rule.severity,
                message: format!(
                    "house {house}: {:?} = {value:.3}{day} outside [{}, {}]",
                    rule.variable,
                    fmt_bound(rule.lower),
                    fmt_bound(rule.upper)
                ),
                acknowledged_by: None,
            });
        }
    }
    out
}

fn fmt_bound(b: Option<f64>) -> String {
    b.map_or_else(|| "-".into(), |v| v.to_string())
}
