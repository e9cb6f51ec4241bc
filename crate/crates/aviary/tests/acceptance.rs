//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any fails.
//!
//! The pipeline artifacts (corpus, models, plan) are produced once by the
//! `aviary` binary and shared by the criteria that need them.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::Instant;

use aviary::condosim::{run_condominium, CondoConfig};
use aviary::dataset::{
    detect_outlier_flock, generate_corpus_from, ground_truth_optimum, load_samples, FlockState,
    GeneratorConfig,
};
use aviary::domain::{fcr_basic, fcr_normalized, minmax_denorm, minmax_norm, normalize_by_area};
use aviary::evolve::{
    check_restrictions, crossover_heuristic, mutate_adaptive, run_ga, GaConfig, Restrictions,
};
use aviary::planner::{
    benchmark_random_specialists, box_midpoint, day_axes, exhaustive_oracle, fitness_week6,
    restrictions_for_axes, rollout_plans, FinalActionPlan, PlannerReport,
};
use aviary::protocol::payload::telemetry_request;
use aviary::protocol::{
    overlapping_requests, Frame, FunctionCode, Master, MasterConfig, PlanWrite, Status,
};
use aviary::supervisor::{
    adaptive_cycle, AdaptiveConfig, Decision, FlockStatus, MemoryStore, PlanRecord, Supervisor,
    SupervisorConfig,
};
use aviary::surrogate::network::Network;
use aviary::surrogate::train::{loss_and_grad, SequenceSet};
use aviary::surrogate::{load_models, WeekModel};
use aviary::{DayPlan, FlockSample, Week};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Verdict = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Artifacts {
    _dir: tempfile::TempDir,
    corpus: PathBuf,
    holdout_models: PathBuf,
    models: PathBuf,
    plan: PathBuf,
    report: PathBuf,
}

fn aviary(args: &[&str]) -> Result<Value, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_aviary"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "aviary {} failed: {}",
            args[0],
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.lines().last().unwrap_or("")).map_err(|e| e.to_string())
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

/// gen-data, train (with and without a 2-flock holdout) and optimize, all
/// through the command line.
fn artifacts() -> Result<&'static Artifacts, String> {
    static A: OnceLock<Result<Artifacts, String>> = OnceLock::new();
    A.get_or_init(|| {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let corpus = dir.path().join("flocks.csv");
        let holdout_models = dir.path().join("models-holdout");
        let models = dir.path().join("models");
        let plan = dir.path().join("plan.json");
        aviary(&["gen-data", "--flocks", "12", "--out", p(&corpus)])?;
        aviary(&[
            "train",
            "--samples",
            p(&corpus),
            "--out",
            p(&holdout_models),
            "--holdout",
            "2",
        ])?;
        aviary(&["train", "--samples", p(&corpus), "--out", p(&models)])?;
        aviary(&["optimize", "--models", p(&models), "--out", p(&plan)])?;
        Ok(Artifacts {
            report: dir.path().join("report.json"),
            _dir: dir,
            corpus,
            holdout_models,
            models,
            plan,
        })
    })
    .as_ref()
    .map_err(Clone::clone)
}

fn models() -> Result<Vec<WeekModel>, String> {
    load_models(&artifacts()?.models).map_err(|e| e.to_string())
}

fn restrictions() -> Result<Vec<Restrictions>, String> {
    let text = std::fs::read_to_string(artifacts()?.models.join(aviary::cli::RESTRICTIONS_FILE))
        .map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn plan_and_report() -> Result<(FinalActionPlan, PlannerReport), String> {
    let a = artifacts()?;
    let plan =
        FinalActionPlan::from_json(&std::fs::read_to_string(&a.plan).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let report =
        serde_json::from_str(&std::fs::read_to_string(&a.report).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    Ok((plan, report))
}

fn fcr_algebra() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut worst_identity: f64 = 0.0;
    let house = aviary::HouseGeometry::large();
    for _ in 0..10_000 {
        let a = rng.random_range(0.01..10.0);
        let b = rng.random_range(0.5..30.0);
        let c = rng.random_range(30.0..4000.0);
        let want = 1000.0 * a / c;
        let got = fcr_normalized(a, b, c).map_err(|e| e.to_string())?;
        worst = worst.max((got - want).abs() / want.max(1.0));

        let dfc = rng.random_range(100.0..200_000.0);
        let nlb = rng.random_range(1_000.0..30_000.0_f64).round();
        let n = normalize_by_area(0.0, nlb, dfc, &house, nlb).map_err(|e| e.to_string())?;
        let basic = fcr_basic(dfc, nlb, c).map_err(|e| e.to_string())?;
        let norm = fcr_normalized(n.dfcpb, n.nlbpa, c).map_err(|e| e.to_string())?;
        worst_identity = worst_identity.max((basic - norm).abs() / basic.max(1.0));
    }
    ensure(
        worst <= 1e-12 && worst_identity <= 1e-12,
        format!("max error {worst:.1e}, basic vs normalized {worst_identity:.1e}"),
    )
}

fn norm_roundtrip() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let n = rng.random_range(1..60);
        let mini: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let maxi: Vec<f64> = mini
            .iter()
            .map(|m| m + rng.random_range(0.1..500.0))
            .collect();
        let v: Vec<f64> = mini
            .iter()
            .zip(&maxi)
            .map(|(lo, hi)| rng.random_range(*lo..=*hi))
            .collect();
        let back = minmax_denorm(
            &minmax_norm(&v, &maxi, &mini).map_err(|e| e.to_string())?,
            &maxi,
            &mini,
        )
        .map_err(|e| e.to_string())?;
        for (x, y) in v.iter().zip(&back) {
            worst = worst.max((x - y).abs() / x.abs().max(1.0));
        }
    }
    let example = minmax_norm(&[24.0], &[28.0], &[23.0]).map_err(|e| e.to_string())?[0];
    ensure(
        worst <= 1e-12 && example == 0.2,
        format!("max roundtrip error {worst:.1e}, N(24;28,23) = {example}"),
    )
}

fn gradient_check() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut net = Network::he_init(10, 2, 3, 3, &mut rng);
    for t in net.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    net.out_b.iter_mut().for_each(|b| *b = 0.6 + b.abs());
    let mut set = SequenceSet::default();
    for _ in 0..2 {
        set.plans
            .push((0..2 * 7).map(|_| rng.random_range(0.0..1.0)).collect());
        set.y0
            .push((0..3).map(|_| rng.random_range(0.0..1.0)).collect());
        set.targets.push(
            (0..2)
                .map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect(),
        );
    }
    let (eps, l2) = (1e-5, 0.003);
    let analytic = loss_and_grad(&net, &set, l2)
        .map_err(|e| e.to_string())?
        .grad;
    let grads: Vec<Vec<f64>> = analytic
        .tensors()
        .into_iter()
        .map(|(t, _)| t.to_vec())
        .collect();
    let (mut worst, mut count): (f64, usize) = (0.0, 0);
    for (ti, g) in grads.iter().enumerate() {
        for (k, gk) in g.iter().enumerate() {
            let mut plus = net.clone();
            plus.tensors_mut()[ti][k] += eps;
            let mut minus = net.clone();
            minus.tensors_mut()[ti][k] -= eps;
            let lp = loss_and_grad(&plus, &set, l2)
                .map_err(|e| e.to_string())?
                .loss;
            let lm = loss_and_grad(&minus, &set, l2)
                .map_err(|e| e.to_string())?
                .loss;
            let numeric = (lp - lm) / (2.0 * eps);
            worst = worst.max((numeric - gk).abs() / numeric.abs().max(gk.abs()).max(1e-7));
            count += 1;
        }
    }
    ensure(
        worst <= 1e-4,
        format!("{count} parameters, worst relative error {worst:.1e}"),
    )
}

fn surrogate_quality() -> Verdict {
    let a = artifacts()?;
    let text = std::fs::read_to_string(a.holdout_models.join(aviary::cli::R2_FILE))
        .map_err(|e| e.to_string())?;
    let r2: aviary::cli::R2File = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let min =
        |f: fn(&aviary::cli::WeekR2) -> f64| r2.weeks.iter().map(f).fold(f64::INFINITY, f64::min);
    let (mdw, dfcpb, nlbpa) = (min(|w| w.mdw), min(|w| w.dfcpb), min(|w| w.nlbpa));
    ensure(
        r2.evaluated_on == "holdout"
            && r2.weeks.len() == 6
            && mdw >= 0.95
            && dfcpb >= 0.95
            && nlbpa >= 0.80,
        format!(
            "held-out flocks {:?}: min R² MdW {mdw:.3}, dFCpB {dfcpb:.3}, NlBpA {nlbpa:.3}",
            r2.flocks
        ),
    )
}

fn ga_vs_oracle() -> Verdict {
    let models = models()?;
    let r = &restrictions()?[5];
    let model = &models[5];
    let week = Week::new(6).unwrap();
    let base = box_midpoint(r).map_err(|e| e.to_string())?;
    let obj = |g: &[f64]| fitness_week6(g, model).unwrap_or(f64::NAN);
    let mut lines = Vec::new();
    let mut ok = true;
    // (days, searched columns): 2 = mean temperature, 5 = mean humidity
    for (days, cols) in [(1, vec![2]), (2, vec![5]), (2, vec![2, 5])] {
        let axes = day_axes(r, week, days, &cols, 0.5, 1.0).map_err(|e| e.to_string())?;
        let best = exhaustive_oracle(&obj, &base, &axes, 10_000_000).map_err(|e| e.to_string())?;
        let box_r = restrictions_for_axes(&base, &axes).map_err(|e| e.to_string())?;
        let mut worst: f64 = f64::NEG_INFINITY;
        let mut hits = 0;
        for seed in 1..=5 {
            let cfg = GaConfig {
                seed,
                pop_size: 50,
                max_iterations: 300,
                stall_generations: 50,
                ..GaConfig::default()
            };
            let res = run_ga(&obj, &box_r, &cfg).map_err(|e| e.to_string())?;
            let gap = 100.0 * (res.best_fitness - best.fitness) / best.fitness;
            worst = worst.max(gap);
            hits += usize::from(gap <= 1.0);
        }
        ok &= hits == 5;
        lines.push(format!(
            "{days}d×{}v grid {} pts: {hits}/5 within 1% (worst {worst:+.4}%)",
            cols.len(),
            best.evaluations
        ));
    }
    ensure(ok, lines.join("; "))
}

fn boundary_errors() -> Verdict {
    let (_, report) = plan_and_report()?;
    let worst = report.worst_relative_pct();
    ensure(
        report.boundary.len() == 5 && worst <= 2.5,
        format!(
            "worst boundary error {worst:.3}% over {} junctions",
            report.boundary.len()
        ),
    )
}

fn estimate_gap() -> Verdict {
    let (plan, report) = plan_and_report()?;
    let gap = report.gap_pct();
    ensure(
        gap <= 0.5,
        format!(
            "fcr_est {:.5}, fcr_res {:.5}, gap {gap:.4}%",
            plan.fcr_est, plan.fcr_res
        ),
    )
}

fn dominance() -> Verdict {
    let (plan, _) = plan_and_report()?;
    let models = models()?;
    let bench = benchmark_random_specialists(&models, &restrictions()?, 1000, 7)
        .map_err(|e| e.to_string())?;
    let cfg = GeneratorConfig::default();
    let (truth, gt) =
        ground_truth_optimum(&cfg, aviary::HouseGeometry::large()).map_err(|e| e.to_string())?;
    let comfort = rollout_plans(
        &models,
        &cfg.comfort_plan(),
        &truth.initial_conditions.response(),
    )
    .map_err(|e| e.to_string())?
    .fcr;
    let off = 100.0 * (plan.fcr_res - gt).abs() / gt;
    ensure(
        plan.fcr_res <= bench.best_fcr && plan.fcr_res <= comfort && off <= 3.0,
        format!(
            "fcr_res {:.4}; best random {:.4}; comfort plan {comfort:.4}; ground truth {gt:.4} ({off:.2}% away)",
            plan.fcr_res, bench.best_fcr
        ),
    )
}

fn ga_operators() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dim = 12;
    let p1: Vec<f64> = (0..dim).map(|_| rng.random_range(-50.0..50.0)).collect();
    let p2: Vec<f64> = (0..dim).map(|_| rng.random_range(-50.0..50.0)).collect();
    for beta in [0.0, 0.6, 1.0] {
        let child = crossover_heuristic(&p1, &p2, beta, None).map_err(|e| e.to_string())?;
        if child
            .iter()
            .enumerate()
            .any(|(i, c)| *c != p2[i] + beta * (p1[i] - p2[i]))
        {
            return Err(format!(
                "crossover differs from p2 + β(p1 − p2) at β = {beta}"
            ));
        }
    }
    let lower: Vec<f64> = (0..dim).map(|k| 1.0 + k as f64).collect();
    let upper: Vec<f64> = lower.iter().map(|l| l * 3.0).collect();
    let r = Restrictions::new(lower.clone(), upper).map_err(|e| e.to_string())?;
    let mut violations = 0;
    let mut g = lower.clone();
    for i in 0..100_000 {
        if i % 1000 == 0 {
            g = r
                .lower
                .iter()
                .zip(&r.upper)
                .map(|(l, u)| rng.random_range(*l..=*u))
                .collect();
        }
        mutate_adaptive(&mut g, &r, 0.5, 1.0, &mut rng);
        violations += usize::from(!check_restrictions(&g, &r).map_err(|e| e.to_string())?);
    }
    let sphere = |g: &[f64]| g.iter().map(|x| (x - 4.0) * (x - 4.0)).sum::<f64>();
    let mut rising = 0;
    for seed in 1..=5 {
        let cfg = GaConfig {
            seed,
            pop_size: 40,
            max_iterations: 150,
            ..GaConfig::default()
        };
        let res = run_ga(&sphere, &r, &cfg).map_err(|e| e.to_string())?;
        rising += res
            .history
            .windows(2)
            .filter(|w| w[1].best > w[0].best)
            .count();
    }
    ensure(violations == 0 && rising == 0, format!("crossover exact for β ∈ {{0, 0.6, 1}}; {violations} violations in 10⁵ mutations; {rising} rises of the elite curve over 5 seeds"))
}

fn fast_link() -> MasterConfig {
    MasterConfig {
        timeout_ms: 200,
        retries: 2,
        connect_timeout_ms: 1000,
    }
}

async fn protocol() -> Verdict {
    let plan = DayPlan {
        day: 3,
        t_min: 29.0,
        t_avg: 30.5,
        t_max: 32.0,
        h_min: 50.0,
        h_avg: 56.0,
        h_max: 62.0,
    };
    let frame = Frame::new(
        2,
        FunctionCode::WriteDayPlan,
        PlanWrite::new(1001, &plan)
            .map_err(|e| e.to_string())?
            .encode(),
    );
    let bytes = frame.encode().map_err(|e| e.to_string())?;
    let roundtrip = Frame::decode(&bytes).map_err(|e| e.to_string())? == frame;
    let mut missed = 0;
    for bit in 0..bytes.len() * 8 {
        let mut bad = bytes.clone();
        bad[bit / 8] ^= 1 << (bit % 8);
        missed += usize::from(Frame::decode(&bad).is_ok());
    }

    let condo = run_condominium(&CondoConfig::with_houses(3), "127.0.0.1:0")
        .await
        .map_err(|e| e.to_string())?;
    let m = std::sync::Arc::new(Master::new(condo.local_addr(), fast_link()));
    let mut tasks = Vec::new();
    for i in 0..12u8 {
        let m = m.clone();
        tasks.push(tokio::spawn(async move {
            m.transact(&Frame::new(
                1 + i % 3,
                FunctionCode::ReadTelemetry,
                telemetry_request(None).unwrap(),
            ))
            .await
        }));
    }
    for t in tasks {
        t.await
            .map_err(|e| e.to_string())?
            .map_err(|e| e.to_string())?;
    }
    let overlap = overlapping_requests(&m.events());

    let status = |t: aviary::protocol::Transaction| {
        Status::decode(&t.reply.payload).map_err(|e| e.to_string())
    };
    let flock = status(
        m.transact(&Frame::new(2, FunctionCode::ReportStatus, vec![]))
            .await
            .map_err(|e| e.to_string())?,
    )?
    .flock_id;
    let write = Frame::new(
        2,
        FunctionCode::WriteDayPlan,
        PlanWrite::new(flock, &DayPlan { day: 1, ..plan })
            .map_err(|e| e.to_string())?
            .encode(),
    );
    let a = m.transact(&write).await.map_err(|e| e.to_string())?.reply;
    let b = m.transact(&write).await.map_err(|e| e.to_string())?.reply;
    let pending = status(
        m.transact(&Frame::new(2, FunctionCode::ReportStatus, vec![]))
            .await
            .map_err(|e| e.to_string())?,
    )?
    .pending_plans;
    condo.stop().await;
    ensure(
        roundtrip && missed == 0 && overlap.is_none() && a == b && pending == 1,
        format!(
            "roundtrip {roundtrip}; {missed}/{} bit flips undetected; overlapping requests {overlap:?}; repeated write identical {} with {pending} pending plan",
            bytes.len() * 8,
            a == b
        ),
    )
}

async fn end_to_end() -> Verdict {
    let a = artifacts()?;
    let (plan, report) = plan_and_report()?;
    let history = load_samples(&a.corpus).map_err(|e| e.to_string())?;
    let condo = run_condominium(&CondoConfig::with_houses(3), "127.0.0.1:0")
        .await
        .map_err(|e| e.to_string())?;
    let mut cfg = SupervisorConfig::new(vec![1, 2, 3]);
    cfg.master = fast_link();
    cfg.auto_adapt = false;
    let sup = Supervisor::open(
        cfg,
        condo.local_addr(),
        models()?,
        history,
        Box::new(MemoryStore::new()),
    )
    .map_err(|e| e.to_string())?;
    sup.step().await.map_err(|e| e.to_string())?;
    let record = PlanRecord {
        job: 0,
        model_version: sup.models().version,
        plan: plan.clone(),
        report,
        approved_at: chrono::Utc::now(),
    };
    sup.install_plan(record, "acceptance")
        .await
        .map_err(|e| e.to_string())?;
    for _ in 0..40 {
        condo.advance_day();
        sup.step().await.map_err(|e| e.to_string())?;
    }
    let ledger = sup.ledger();
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    let mut ok = ledger.distributions.len() == 40 && ledger.flocks.len() == 3;
    for f in ledger.flocks.values() {
        let rep = sup.flock_report(f.flock_id).map_err(|e| e.to_string())?;
        let measured = rep.measured_fcr.ok_or("flock has no final FCR")?;
        let dev = 100.0 * (measured - plan.fcr_res).abs() / plan.fcr_res;
        ok &= f.status == FlockStatus::Complete && rep.fallback_days.is_empty();
        worst = worst.max(dev);
        lines.push(format!("house {} {measured:.4}", f.house));
    }
    condo.stop().await;
    ensure(
        ok && worst <= 5.0,
        format!(
            "{} daily plans sent; fcr_res {:.4}; measured {}; worst deviation {worst:.2}%",
            ledger.distributions.len(),
            plan.fcr_res,
            lines.join(", ")
        ),
    )
}

/// A copy of `src` raised again with twenty times its losses on days 12 to 20.
fn mortality_burst(cfg: &GeneratorConfig, src: &FlockSample) -> Result<FlockSample, String> {
    let mut state = FlockState::new(cfg, src.house, src.initial_birds, src.flock_id)
        .map_err(|e| e.to_string())?;
    let mut burst = src.clone();
    for (k, p) in src.plans.iter().enumerate() {
        let extra = if (12..=20).contains(&p.day) {
            src.outcomes[k].dm.max(1) * 19
        } else {
            0
        };
        burst.outcomes[k] = state.step(cfg, p, extra).map_err(|e| e.to_string())?;
    }
    Ok(burst)
}

fn adaptive() -> Verdict {
    let history = load_samples(&artifacts()?.corpus).map_err(|e| e.to_string())?;
    let models = models()?;
    let acfg = AdaptiveConfig::default();
    let base = GeneratorConfig::default();

    let fresh = generate_corpus_from(&base, &base, 12, 2).map_err(|e| e.to_string())?;
    let keep = adaptive_cycle(&fresh, &history, &models, &acfg).map_err(|e| e.to_string())?;

    // shifted flocks, produced until three pass the outlier screen
    let shifted = base.with_comfort_shift(2.0);
    let mut accepted = Vec::new();
    let mut produced = 0;
    for id in 100..130 {
        let s = generate_corpus_from(&shifted, &shifted, id, 1)
            .map_err(|e| e.to_string())?
            .remove(0);
        produced += 1;
        if !detect_outlier_flock(&s, &history, &acfg.outlier)
            .map_err(|e| e.to_string())?
            .reject
        {
            accepted.push(s);
        }
        if accepted.len() == 3 {
            break;
        }
    }
    let retrain = adaptive_cycle(&accepted, &history, &models, &acfg).map_err(|e| e.to_string())?;

    let burst = mortality_burst(&base, &fresh[0])?;
    let mut with_burst = fresh.clone();
    with_burst[0] = burst;
    with_burst.push(
        generate_corpus_from(&base, &base, 14, 1)
            .map_err(|e| e.to_string())?
            .remove(0),
    );
    let screened =
        adaptive_cycle(&with_burst, &history, &models, &acfg).map_err(|e| e.to_string())?;
    let rejected_first = screened
        .rejected
        .iter()
        .any(|r| r.flock_id == with_burst[0].flock_id);

    ensure(
        keep.decision == Decision::Keep
            && retrain.decision == Decision::Retrain
            && accepted.len() == 3
            && rejected_first
            && screened.accepted.len() == 2
            && !screened.evaluated,
        format!(
            "2 new: {:?} ({}); shift +2 °C, 3 of {produced} accepted: {:?} ({}); burst flock rejected {rejected_first}, {} of {} counted",
            keep.decision,
            keep.reason,
            retrain.decision,
            retrain.reason,
            screened.accepted.len(),
            screened.required
        ),
    )
}

fn main() -> ExitCode {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("runtime");
    type Check<'a> = (&'a str, Box<dyn Fn() -> Verdict + 'a>);
    let checks: Vec<Check> = vec![
        ("fcr algebra", Box::new(fcr_algebra)),
        ("normalisation roundtrip", Box::new(norm_roundtrip)),
        ("lstm gradient check", Box::new(gradient_check)),
        ("surrogate quality", Box::new(surrogate_quality)),
        ("ga vs exhaustive oracle", Box::new(ga_vs_oracle)),
        ("week boundary errors", Box::new(boundary_errors)),
        ("estimate vs rollout gap", Box::new(estimate_gap)),
        ("optimizer dominance", Box::new(dominance)),
        ("ga operator properties", Box::new(ga_operators)),
        ("link protocol", Box::new(|| rt.block_on(protocol()))),
        ("end to end", Box::new(|| rt.block_on(end_to_end()))),
        ("adaptive cycle", Box::new(adaptive)),
    ];
    let mut failed = 0;
    for (name, check) in &checks {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(d) => println!("PASS  {name:<26} {d}  [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name:<26} {d}  [{secs:.1}s]");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        checks.len() - failed,
        checks.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
