use std::sync::{Arc, OnceLock};
use std::time::Duration;

use aviary_condo::condosim::{run_condominium, CondoConfig, CondoHandle, Fault};
use aviary_condo::protocol::MasterConfig;
use aviary_condo::supervisor::{
    AckOutcome, Decision, FlockStatus, JobState, JsonlStore, MemoryStore, PlanRecord, StoreEvent,
    Supervisor, SupervisorConfig, SupervisorError,
};
use aviary_core::dataset::{generate_corpus, GeneratorConfig};
use aviary_core::evolve::GaConfig;
use aviary_core::surrogate::{train_models, Hyperparams, WeekModel};
use aviary_core::FlockSample;

struct Fixture {
    history: Vec<FlockSample>,
    models: Vec<WeekModel>,
}

/// Small surrogates: the tests exercise the service, not model quality.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let history = generate_corpus(&GeneratorConfig::default(), 12).unwrap();
        let hp = Hyperparams {
            epochs: 40,
            ..Hyperparams::default()
        };
        let models = train_models(&history, &hp).unwrap();
        Fixture { history, models }
    })
}

fn config(houses: u8) -> SupervisorConfig {
    let mut cfg = SupervisorConfig::new((1..=houses).collect());
    cfg.master = MasterConfig {
        timeout_ms: 150,
        retries: 2,
        connect_timeout_ms: 500,
    };
    cfg.ga = GaConfig {
        pop_size: 20,
        max_iterations: 15,
        stall_generations: 15,
        ..GaConfig::default()
    };
    cfg.auto_adapt = false;
    cfg
}

async fn start(
    houses: u8,
    store: Box<dyn aviary_condo::supervisor::Store>,
) -> (CondoHandle, Arc<Supervisor>) {
    let condo = run_condominium(&CondoConfig::with_houses(houses), "127.0.0.1:0")
        .await
        .unwrap();
    let f = fixture();
    let sup = Supervisor::open(
        config(houses),
        condo.local_addr(),
        f.models.clone(),
        f.history.clone(),
        store,
    )
    .unwrap();
    (condo, sup)
}

async fn wait_job(sup: &Supervisor, id: u64) {
    for _ in 0..600 {
        if sup.job(id).unwrap().state != JobState::Running {
            return;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("job {id} did not finish");
}

async fn approved_plan(sup: &Arc<Supervisor>) -> PlanRecord {
    let id = sup.start_optimize(None).unwrap();
    wait_job(sup, id).await;
    let job = sup.job(id).unwrap();
    assert_eq!(job.state, JobState::Succeeded, "{:?}", job.error);
    assert_eq!(job.progress.weeks_done, 6);
    sup.approve(id, "tester").await.unwrap().0
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn houses_run_exactly_the_distributed_plan() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    let (condo, sup) = start(3, Box::new(JsonlStore::open(&path).unwrap())).await;
    let opened = sup.step().await.unwrap();
    assert_eq!(opened.sync.opened.len(), 3);
    assert!(
        opened.distributions.is_empty(),
        "nothing to send before a plan is approved"
    );

    let plan = approved_plan(&sup).await;
    let first = sup.ledger().distributions;
    assert_eq!(first.len(), 1);
    assert_eq!(first[0].day, 1);
    assert!(first[0]
        .houses
        .iter()
        .all(|h| h.outcome == AckOutcome::Acked));

    for _ in 0..40 {
        condo.advance_day();
        sup.step().await.unwrap();
    }
    let ledger = sup.ledger();
    assert_eq!(ledger.distributions.len(), 40);
    for f in ledger.flocks.values() {
        assert_eq!(f.status, FlockStatus::Complete);
        assert_eq!(f.telemetry.len(), 41);
        let house = condo.with(|c| c.house(f.house).unwrap().ledger().to_vec());
        for (d, e) in house.iter().enumerate() {
            let day = d as u32 + 1;
            assert!(!e.fallback, "house {} day {day} fell back", f.house);
            let applied = f.applied_plans.iter().find(|a| a.day == day).unwrap();
            // every plan a house ran traces back to one distribution
            assert_eq!(
                ledger.distribution(applied.distribution).unwrap().plan,
                e.plan
            );
            assert_eq!(e.plan, f.telemetry[d + 1].plan.unwrap());
        }
        let report = sup.flock_report(f.flock_id).unwrap();
        assert_eq!(report.fcr_res, Some(plan.plan.fcr_res));
        assert!(report.measured_fcr.unwrap() > 1.0);
        assert!(report.fallback_days.is_empty());
    }

    // a restart replays to the same state
    let f = fixture();
    drop(sup);
    let again = Supervisor::open(
        config(3),
        condo.local_addr(),
        f.models.clone(),
        f.history.clone(),
        Box::new(JsonlStore::open(&path).unwrap()),
    )
    .unwrap();
    assert_eq!(again.ledger(), ledger);
    condo.stop().await;
}

#[tokio::test]
async fn out_of_range_days_send_nothing() {
    let (condo, sup) = start(2, Box::new(MemoryStore::new())).await;
    sup.sync().await.unwrap();
    let plan = aviary_core::planner::FinalActionPlan::from_json(&fixture_plan()).unwrap();
    let sent = sup.master().events().len();
    for day in [0, 41] {
        assert!(
            matches!(sup.distribute_daily_plan(day, &plan).await, Err(SupervisorError::DayOutOfRange(d)) if d == day)
        );
    }
    assert_eq!(sup.master().events().len(), sent);
    let ok = sup.distribute_daily_plan(3, &plan).await.unwrap();
    assert_eq!(ok.houses.len(), 2);
    condo.stop().await;
}

/// A valid plan without running the optimiser: the week genomes of the
/// first history flock.
fn fixture_plan() -> String {
    use aviary_core::planner::{FinalActionPlan, WeekPlan};
    let s = &fixture().history[0];
    let weeks = aviary_core::dataset::partition_weeks(std::slice::from_ref(s)).unwrap();
    let plan = FinalActionPlan {
        weeks: weeks
            .iter()
            .map(|w| WeekPlan::new(w.week, w.inputs[0].clone()).unwrap())
            .collect(),
        i_c: s.initial_conditions.response(),
        fcr_est: 1.6,
        fcr_res: 1.6,
    };
    plan.to_json().unwrap()
}

#[tokio::test]
async fn failed_delivery_raises_an_alarm() {
    let (condo, sup) = start(3, Box::new(MemoryStore::new())).await;
    sup.sync().await.unwrap();
    condo.set_fault(
        2,
        Fault {
            unreachable: true,
            ..Fault::default()
        },
    );
    let plan = aviary_core::planner::FinalActionPlan::from_json(&fixture_plan()).unwrap();
    let rep = sup.distribute_daily_plan(1, &plan).await.unwrap();
    let outcomes: Vec<_> = rep
        .houses
        .iter()
        .map(|h| (h.address, h.outcome, h.retries))
        .collect();
    assert_eq!(
        outcomes,
        [
            (1, AckOutcome::Acked, 0),
            (2, AckOutcome::Failed, 2),
            (3, AckOutcome::Acked, 0)
        ]
    );
    let alarms = sup.alarms();
    assert_eq!(alarms.len(), 1);
    assert_eq!(alarms[0].house, 2);
    // the same failure inside the dedup window is not raised again
    sup.distribute_daily_plan(1, &plan).await.unwrap();
    assert_eq!(sup.alarms().len(), 1);
    condo.clear_faults();
    let ack = sup.acknowledge_alarm(alarms[0].id, "op").unwrap();
    assert_eq!(ack.acknowledged_by.as_deref(), Some("op"));
    condo.stop().await;
}

#[tokio::test]
async fn mortality_entries_are_checked_and_applied() {
    let (condo, sup) = start(3, Box::new(MemoryStore::new())).await;
    for _ in 0..3 {
        condo.advance_day();
    }
    sup.sync().await.unwrap();
    assert!(matches!(
        sup.record_mortality(9, 3, 5, "ana").await,
        Err(SupervisorError::UnknownHouse(9))
    ));
    assert!(matches!(
        sup.record_mortality(1, 2, 5, "ana").await,
        Err(SupervisorError::StaleDay {
            expected: 3,
            got: 2,
            ..
        })
    ));
    let audit_before = sup.ledger().audit.len();
    let zero = sup.record_mortality(1, 3, 0, "ana").await.unwrap();
    assert_eq!(zero.projected_nlb, zero.telemetry.as_ref().map(|t| t.nlb));
    let ledger = sup.ledger();
    assert_eq!(ledger.audit.len(), audit_before + 1);
    assert!(ledger.flocks.values().all(|f| f.mortality.is_empty()));

    let ack = sup.record_mortality(1, 3, 50, "ana").await.unwrap();
    let before = ack.telemetry.unwrap().nlb;
    assert_eq!(ack.projected_nlb, Some(before - 50));
    condo.advance_day();
    sup.sync().await.unwrap();
    let day4 = sup.telemetry(1, None, None).unwrap().pop().unwrap();
    let natural = condo.with(|c| c.house(1).unwrap().ledger()[3]);
    assert_eq!(natural.injected_deaths, 50);
    assert_eq!(day4.nlb, before - day4.dm);
    assert!(day4.dm >= 50);

    // finished flocks take no more entries
    for _ in 4..40 {
        condo.advance_day();
    }
    sup.sync().await.unwrap();
    assert!(matches!(
        sup.record_mortality(1, 40, 1, "ana").await,
        Err(SupervisorError::NoActiveFlock(1))
    ));
    condo.stop().await;
}

#[tokio::test]
async fn adaptive_cycle_waits_for_enough_flocks() {
    let (condo, sup) = start(1, Box::new(MemoryStore::new())).await;
    for _ in 0..40 {
        condo.advance_day();
    }
    let rep = sup.sync().await.unwrap();
    assert_eq!(rep.completed.len(), 1);
    let out = sup.adaptive_check().await.unwrap();
    assert_eq!(out.decision, Decision::Keep);
    assert!(!out.evaluated);
    assert_eq!(out.required, 3);
    assert_eq!(out.accepted.len() + out.rejected.len(), 1);
    // not evaluated yet, so it is still waiting for company
    assert_eq!(sup.ledger().unevaluated().len(), out.accepted.len());
    condo.stop().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn http_api_round_trip() {
    let (condo, sup) = start(2, Box::new(MemoryStore::new())).await;
    condo.advance_day();
    sup.sync().await.unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}/api/v1", listener.local_addr().unwrap());
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(aviary_condo::supervisor::api::serve(
        sup.clone(),
        listener,
        async {
            rx.await.ok();
        },
    ));
    let http = reqwest::Client::new();
    let get = |path: &str| http.get(format!("{base}{path}")).send();

    let health: serde_json::Value = get("/health").await.unwrap().json().await.unwrap();
    assert_eq!(health["status"], "ok");
    let houses: serde_json::Value = get("/houses").await.unwrap().json().await.unwrap();
    assert_eq!(houses.as_array().unwrap().len(), 2);
    assert_eq!(houses[0]["latest"]["day"], 1);

    let tel: serde_json::Value = get("/houses/1/telemetry")
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(tel.as_array().unwrap().len(), 2);
    let since = chrono::Utc::now() + chrono::Duration::hours(1);
    let later = get(&format!(
        "/houses/1/telemetry?from={}",
        since.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    ))
    .await
    .unwrap();
    assert_eq!(
        later
            .json::<serde_json::Value>()
            .await
            .unwrap()
            .as_array()
            .unwrap()
            .len(),
        0
    );
    assert_eq!(get("/houses/7/telemetry").await.unwrap().status(), 404);

    let r = http
        .post(format!("{base}/houses/1/mortality"))
        .json(&serde_json::json!({"day": 0, "count": 3, "operator": "bo"}))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), 409);
    assert_eq!(
        r.json::<serde_json::Value>().await.unwrap()["error"],
        "stale_day"
    );
    let r = http
        .post(format!("{base}/houses/1/mortality"))
        .json(&serde_json::json!({"day": 1, "count": 3, "operator": "bo"}))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), 200);

    assert_eq!(get("/plan/current").await.unwrap().status(), 404);
    let r = http
        .post(format!("{base}/plan/optimize"))
        .json(&serde_json::json!({"pop_size": 12, "max_iterations": 5}))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), 202);
    let id = r.json::<serde_json::Value>().await.unwrap()["job_id"]
        .as_u64()
        .unwrap();
    wait_job(&sup, id).await;
    let job: serde_json::Value = get(&format!("/jobs/{id}"))
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(job["state"], "succeeded");
    let r = http
        .post(format!("{base}/plan/approve"))
        .json(&serde_json::json!({"job_id": id}))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), 200);
    let body: serde_json::Value = r.json().await.unwrap();
    assert_eq!(body["distributions"][0]["day"], 2);
    let current: serde_json::Value = get("/plan/current").await.unwrap().json().await.unwrap();
    assert_eq!(current["job"], id);
    // timestamps are RFC 3339
    chrono::DateTime::parse_from_rfc3339(current["approved_at"].as_str().unwrap()).unwrap();

    let flock = houses[0]["flock_id"].as_u64().unwrap();
    let report: serde_json::Value = get(&format!("/flocks/{flock}/report"))
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(report["record"]["mortality"][0]["count"], 3);
    assert_eq!(get("/flocks/1/report").await.unwrap().status(), 404);
    assert!(get("/alarms")
        .await
        .unwrap()
        .json::<serde_json::Value>()
        .await
        .unwrap()
        .is_array());
    assert_eq!(
        get("/models")
            .await
            .unwrap()
            .json::<serde_json::Value>()
            .await
            .unwrap()["version"],
        0
    );

    tx.send(()).unwrap();
    server.await.unwrap().unwrap();
    condo.stop().await;
}

#[test]
fn events_are_plain_json_lines() {
    let e = StoreEvent::FlockStatus {
        flock_id: 4,
        status: FlockStatus::RejectedOutlier,
    };
    let line = serde_json::to_string(&e).unwrap();
    assert_eq!(
        line,
        r#"{"event":"flock_status","flock_id":4,"status":"rejected_outlier"}"#
    );
}
