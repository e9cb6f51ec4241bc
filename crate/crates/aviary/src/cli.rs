//! The `aviary` command line. Every command prints a JSON summary on
//! stdout; failures print `{"error": <kind>, "message": <text>}` on stderr
//! and exit non-zero.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use aviary_condo::condosim::{
    resume_condominium, run_condominium, CondoConfig, CondoHandle, CondoSnapshot, SimError,
};
use aviary_condo::supervisor::{
    api, JsonlStore, MemoryStore, PlanRecord, Store, Supervisor, SupervisorConfig, SupervisorError,
};
use aviary_core::dataset::{
    generate_corpus_from, load_samples, partition_weeks, store_samples, DatasetError,
    GeneratorConfig,
};
use aviary_core::domain::fcr_normalized;
use aviary_core::evolve::{run_ga, EvolveError, GaConfig, Restrictions};
use aviary_core::planner::{
    benchmark_random_specialists, box_midpoint, day_axes, exhaustive_oracle, fitness_week6,
    optimize_flock, restrictions_for_axes, restrictions_from_samples, rollout_progressive,
    FinalActionPlan, PlannerError, PlannerReport, Trajectory,
};
use aviary_core::surrogate::{
    evaluate_r2, load_models, save_models, train_models, Hyperparams, SurrogateError, WeekModel,
};
use aviary_core::week::Week;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub const RESTRICTIONS_FILE: &str = "restrictions.json";
pub const R2_FILE: &str = "r2.json";
pub const MANIFEST_FILE: &str = "train.json";

#[derive(Debug, Parser)]
#[command(
    name = "aviary",
    version,
    about = "Surrogate-assisted climate planning for broiler houses"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic flock corpus.
    GenData(GenDataArgs),
    /// Train the six weekly surrogates.
    Train(TrainArgs),
    /// Search a 40-day plan with the trained surrogates.
    Optimize(OptimizeArgs),
    /// Roll a plan through the surrogates and print the predicted course.
    Rollout(RolloutArgs),
    /// Exhaustive grid over a few final-week set-points, compared with the GA.
    Oracle(OracleArgs),
    /// Random feasible plans as a baseline.
    Benchmark(BenchmarkArgs),
    /// Run a simulated condominium behind the framed link.
    Simulate(SimulateArgs),
    /// Run the supervision service and its HTTP API.
    Serve(ServeArgs),
    /// Write SVG charts of a planner report.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Generator configuration (JSON); defaults when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    pub flocks: u32,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configuration's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub first_id: u32,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// Output directory for the model files and reports.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Hyperparameters (JSON); defaults when absent.
    #[arg(long)]
    pub hyperparams: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Keep the last N flocks out of training and report R² on them.
    #[arg(long, default_value_t = 0)]
    pub holdout: usize,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Planner report path; defaults to `report.json` next to the plan.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Also write the 40 day plans as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// GA configuration (JSON); defaults when absent.
    #[arg(long)]
    pub ga: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub pop_size: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub stall_generations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
    /// CSV output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub models: PathBuf,
    /// Leading days of the final week to search.
    #[arg(long, default_value_t = 2)]
    pub days: usize,
    /// Grid steps: temperature (°C), humidity (%).
    #[arg(long, default_value = "0.5,1", value_parser = parse_grid)]
    pub grid: (f64, f64),
    /// Searched set-points of each day.
    #[arg(long, value_delimiter = ',', default_value = "t_avg,h_avg")]
    pub vars: Vec<String>,
    #[arg(long, default_value_t = 20_000_000)]
    pub budget: u64,
    /// GA runs to compare with the oracle.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Full report, including every plan's FCR.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Condominium configuration (JSON); three reference houses when absent.
    #[arg(long)]
    pub condo: Option<PathBuf>,
    /// Listen address, e.g. `:7502` or `127.0.0.1:0`.
    #[arg(long, default_value = ":7502")]
    pub serve: String,
    /// Milliseconds per simulated day; 0 waits for manual advances.
    #[arg(long)]
    pub tick_ms: Option<u64>,
    /// Resume from a snapshot instead of starting new flocks.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Where to write the final snapshot on shutdown.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// API listen address.
    #[arg(long, default_value = ":8080")]
    pub api: String,
    /// A condominium gateway address, or a condominium configuration file
    /// to simulate in-process.
    #[arg(long)]
    pub condo: String,
    #[arg(long)]
    pub models: PathBuf,
    /// Flocks the models were trained on.
    #[arg(long)]
    pub samples: PathBuf,
    /// Event log; state is kept in memory only when absent.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Supervisor configuration (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Plan to approve at start-up.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub poll_ms: u64,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Planner report written by `optimize`.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Flock corpus for the climate history chart.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Trajectory CSV written by `rollout`.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

fn parse_grid(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [t, h] = parts[..] else {
        return Err("expected <temperature step>,<humidity step>".into());
    };
    let t: f64 = t.trim().parse().map_err(|e| format!("{e}"))?;
    let h: f64 = h.trim().parse().map_err(|e| format!("{e}"))?;
    if !(t > 0.0 && h > 0.0) {
        return Err("grid steps must be positive".into());
    }
    Ok((t, h))
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{what} not found at {}", path.display())]
    MissingInput { what: &'static str, path: PathBuf },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Supervisor(#[from] SupervisorError),
    #[error("{0}")]
    Plot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::MissingInput { .. } => "missing_input",
            Self::Invalid(_) => "invalid_argument",
            Self::Dataset(_) => "dataset",
            Self::Surrogate(_) => "surrogate",
            Self::Planner(_) => "planner",
            Self::Evolve(_) => "evolve",
            Self::Simulation(_) => "simulation",
            Self::Supervisor(_) => "supervisor",
            Self::Plot(_) => "plot",
            Self::Io(_) => "io",
            Self::Json(_) => "json",
            Self::Csv(_) => "csv",
        }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

fn require(path: &Path, what: &'static str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingInput {
            what,
            path: path.to_path_buf(),
        })
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &'static str) -> Result<T> {
    require(path, what)?;
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, v: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// `:7502` means every interface.
pub fn listen_addr(s: &str) -> String {
    if s.starts_with(':') {
        format!("0.0.0.0{s}")
    } else {
        s.to_string()
    }
}

/// Models and search boxes written by `train`.
pub fn load_model_dir(dir: &Path) -> Result<(Vec<WeekModel>, Vec<Restrictions>)> {
    require(dir, "model directory")?;
    let models = load_models(dir)?;
    let restrictions: Vec<Restrictions> =
        read_json(&dir.join(RESTRICTIONS_FILE), "search restrictions")?;
    Ok((models, restrictions))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekR2 {
    pub week: Week,
    pub mdw: f64,
    pub dfcpb: f64,
    pub nlbpa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R2File {
    /// `holdout` or `training`.
    pub evaluated_on: String,
    pub flocks: Vec<u32>,
    pub weeks: Vec<WeekR2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainManifest {
    pub seed: u64,
    pub hyperparams: Hyperparams,
    pub trained_on: Vec<u32>,
    pub holdout: Vec<u32>,
}

pub fn run(cli: Cli) -> Result<serde_json::Value> {
    match cli.command {
        Command::GenData(a) => gen_data(&a),
        Command::Train(a) => train(&a),
        Command::Optimize(a) => optimize(&a),
        Command::Rollout(a) => rollout(&a),
        Command::Oracle(a) => oracle(&a),
        Command::Benchmark(a) => benchmark(&a),
        Command::Simulate(a) => runtime()?.block_on(simulate(a)),
        Command::Serve(a) => runtime()?.block_on(serve(a)),
        Command::Plot(a) => plot(&a),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?)
}

pub fn gen_data(a: &GenDataArgs) -> Result<serde_json::Value> {
    let mut cfg = match &a.config {
        Some(p) => {
            require(p, "generator configuration")?;
            GeneratorConfig::from_json(&fs::read_to_string(p)?)?
        }
        None => GeneratorConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let samples = generate_corpus_from(&cfg, &cfg, a.first_id, a.flocks)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    store_samples(&samples, &a.out)?;
    let fcr: Vec<f64> = samples.iter().filter_map(|s| s.final_fcr().ok()).collect();
    Ok(json!({ "flocks": samples.len(), "out": a.out, "seed": cfg.seed, "final_fcr": fcr }))
}

pub fn train(a: &TrainArgs) -> Result<serde_json::Value> {
    require(&a.samples, "sample corpus")?;
    let samples = load_samples(&a.samples)?;
    if a.holdout >= samples.len() {
        return Err(CliError::Invalid(format!(
            "holdout {} leaves no training flocks out of {}",
            a.holdout,
            samples.len()
        )));
    }
    let mut hp: Hyperparams = match &a.hyperparams {
        Some(p) => read_json(p, "hyperparameters")?,
        None => Hyperparams::default(),
    };
    hp.seed = a.seed;
    if let Some(e) = a.epochs {
        hp.epochs = e;
    }
    hp.validate()?;
    let (train, test) = samples.split_at(samples.len() - a.holdout);
    let models = train_models(train, &hp)?;
    save_models(&models, &a.out)?;
    write_json(
        &a.out.join(RESTRICTIONS_FILE),
        &restrictions_from_samples(train)?,
    )?;

    let eval = if test.is_empty() { train } else { test };
    let weeks = partition_weeks(eval)?;
    let mut r2 = Vec::new();
    for (m, w) in models.iter().zip(&weeks) {
        let r = evaluate_r2(m, w)?;
        r2.push(WeekR2 {
            week: m.week,
            mdw: r.mdw,
            dfcpb: r.dfcpb,
            nlbpa: r.nlbpa,
        });
    }
    let report = R2File {
        evaluated_on: if test.is_empty() {
            "training"
        } else {
            "holdout"
        }
        .into(),
        flocks: eval.iter().map(|s| s.flock_id).collect(),
        weeks: r2,
    };
    write_json(&a.out.join(R2_FILE), &report)?;
    let manifest = TrainManifest {
        seed: a.seed,
        hyperparams: hp,
        trained_on: train.iter().map(|s| s.flock_id).collect(),
        holdout: test.iter().map(|s| s.flock_id).collect(),
    };
    write_json(&a.out.join(MANIFEST_FILE), &manifest)?;
    Ok(json!({ "out": a.out, "trained_on": train.len(), "r2": report }))
}

fn ga_config(path: Option<&Path>) -> Result<GaConfig> {
    Ok(match path {
        Some(p) => {
            require(p, "GA configuration")?;
            GaConfig::from_json(&fs::read_to_string(p)?)?
        }
        None => GaConfig::default(),
    })
}

pub fn optimize(a: &OptimizeArgs) -> Result<serde_json::Value> {
    let (models, restrictions) = load_model_dir(&a.models)?;
    let mut ga = ga_config(a.ga.as_deref())?;
    ga.seed = a.seed.unwrap_or(ga.seed);
    ga.pop_size = a.pop_size.unwrap_or(ga.pop_size);
    ga.max_iterations = a.max_iterations.unwrap_or(ga.max_iterations);
    ga.stall_generations = a.stall_generations.unwrap_or(ga.stall_generations);
    ga.validate()?;
    let (plan, report) = optimize_flock(&models, &restrictions, &ga, |p| {
        if p.stats.generation % 100 == 0 {
            log::info!(
                "{} generation {}: best {:.5}",
                p.week,
                p.stats.generation,
                p.stats.best
            );
        }
    })?;
    write_json(&a.out, &plan)?;
    let report_path = a
        .report
        .clone()
        .unwrap_or_else(|| a.out.with_file_name("report.json"));
    write_json(&report_path, &report)?;
    if let Some(csv) = &a.csv {
        fs::write(csv, plan.to_csv()?)?;
    }
    Ok(json!({
        "plan": a.out,
        "report": report_path,
        "fcr_est": plan.fcr_est,
        "fcr_res": plan.fcr_res,
        "gap_pct": report.gap_pct(),
        "worst_boundary_pct": report.worst_relative_pct(),
        "runtime_s": report.runtime_s,
    }))
}

/// `day,mdw,dfcpb,nlbpa,fcr` rows.
pub fn trajectory_csv(t: &Trajectory) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["day", "mdw", "dfcpb", "nlbpa", "fcr"])?;
    for (d, y) in t.days.iter().enumerate() {
        let fcr = fcr_normalized(y[1], y[2], y[0]).map_err(|e| CliError::Invalid(e.to_string()))?;
        w.serialize((d + 1, y[0], y[1], y[2], fcr))?;
    }
    String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.into_error()))?)
        .map_err(|e| CliError::Invalid(e.to_string()))
}

pub fn rollout(a: &RolloutArgs) -> Result<serde_json::Value> {
    let (models, _) = load_model_dir(&a.models)?;
    require(&a.plan, "plan")?;
    let plan = FinalActionPlan::from_json(&fs::read_to_string(&a.plan)?)?;
    let t = rollout_progressive(&models, &plan)?;
    let text = trajectory_csv(&t)?;
    match &a.out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(json!({ "fcr_res": t.fcr, "days": t.days.len(), "out": a.out }))
}

fn column(name: &str) -> Result<usize> {
    Ok(match name.trim() {
        "t_min" => 1,
        "t_avg" => 2,
        "t_max" => 3,
        "h_min" => 4,
        "h_avg" => 5,
        "h_max" => 6,
        other => return Err(CliError::Invalid(format!("unknown set-point {other:?}"))),
    })
}

pub fn oracle(a: &OracleArgs) -> Result<serde_json::Value> {
    let (models, restrictions) = load_model_dir(&a.models)?;
    let cols = a
        .vars
        .iter()
        .map(|v| column(v))
        .collect::<Result<Vec<_>>>()?;
    let week = Week::new(6).expect("final week");
    let model = &models[5];
    let base = box_midpoint(&restrictions[5])?;
    let axes = day_axes(&restrictions[5], week, a.days, &cols, a.grid.0, a.grid.1)?;
    let obj = |g: &[f64]| fitness_week6(g, model).unwrap_or(f64::NAN);
    let best = exhaustive_oracle(&obj, &base, &axes, a.budget)?;
    let r = restrictions_for_axes(&base, &axes)?;
    let mut runs = Vec::new();
    for seed in 1..=a.seeds {
        let cfg = GaConfig {
            seed,
            pop_size: 50,
            max_iterations: 300,
            stall_generations: 50,
            ..GaConfig::default()
        };
        let res = run_ga(&obj, &r, &cfg)?;
        runs.push(json!({
            "seed": seed,
            "best_fitness": res.best_fitness,
            "gap_pct": 100.0 * (res.best_fitness - best.fitness) / best.fitness,
            "generations": res.generations,
        }));
    }
    Ok(json!({ "axes": axes, "oracle": best, "ga": runs }))
}

pub fn benchmark(a: &BenchmarkArgs) -> Result<serde_json::Value> {
    let (models, restrictions) = load_model_dir(&a.models)?;
    let b = benchmark_random_specialists(&models, &restrictions, a.n, a.seed)?;
    if let Some(p) = &a.out {
        write_json(p, &b)?;
    }
    Ok(json!({
        "n": b.n,
        "best_fcr": b.best_fcr,
        "mean_fcr": b.mean_fcr,
        "sd_fcr": b.sd_fcr,
        "median_fcr": b.median_fcr,
        "worst_fcr": b.worst_fcr,
    }))
}

async fn start_condo(
    condo: Option<&Path>,
    resume: Option<&Path>,
    bind: &str,
    tick_ms: Option<u64>,
) -> Result<CondoHandle> {
    Ok(match (resume, condo) {
        (Some(snap), _) => {
            require(snap, "snapshot")?;
            resume_condominium(
                CondoSnapshot::from_json(&fs::read_to_string(snap)?)?,
                bind,
                tick_ms,
            )
            .await?
        }
        (None, cfg) => {
            let mut cfg = match cfg {
                Some(p) => {
                    require(p, "condominium configuration")?;
                    CondoConfig::load(p)?
                }
                None => CondoConfig::default(),
            };
            if let Some(t) = tick_ms {
                cfg.tick_ms = (t > 0).then_some(t);
            }
            run_condominium(&cfg, bind).await?
        }
    })
}

fn announce(v: &serde_json::Value) {
    println!("{v}");
    let _ = std::io::stdout().flush();
}

async fn simulate(a: SimulateArgs) -> Result<serde_json::Value> {
    let condo = start_condo(
        a.condo.as_deref(),
        a.resume.as_deref(),
        &listen_addr(&a.serve),
        a.tick_ms,
    )
    .await?;
    announce(
        &json!({ "listening": condo.local_addr().to_string(), "houses": condo.view(0).houses.len() }),
    );
    tokio::signal::ctrl_c().await?;
    let snap = condo.stop().await;
    if let Some(p) = &a.snapshot {
        fs::write(p, snap.to_json()?)?;
    }
    Ok(json!({ "stopped_at_tick": snap.tick, "snapshot": a.snapshot }))
}

async fn serve(a: ServeArgs) -> Result<serde_json::Value> {
    let (models, _) = load_model_dir(&a.models)?;
    require(&a.samples, "sample corpus")?;
    let history = load_samples(&a.samples)?;
    let as_file = Path::new(&a.condo);
    let (condo, endpoint, houses): (Option<CondoHandle>, SocketAddr, Vec<u8>) =
        match a.condo.parse::<SocketAddr>() {
            Ok(addr) => (None, addr, vec![]),
            Err(_) => {
                let h = start_condo(Some(as_file), None, "127.0.0.1:0", None).await?;
                let addr = h.local_addr();
                let houses = h.view(0).houses.iter().map(|v| v.address).collect();
                (Some(h), addr, houses)
            }
        };
    let mut cfg: SupervisorConfig = match &a.config {
        Some(p) => read_json(p, "supervisor configuration")?,
        None => SupervisorConfig::new(if houses.is_empty() {
            vec![1, 2, 3]
        } else {
            houses
        }),
    };
    if cfg.model_dir.is_none() {
        cfg.model_dir = Some(a.models.clone());
    }
    let store: Box<dyn Store> = match &a.store {
        Some(p) => Box::new(JsonlStore::open(p)?),
        None => Box::new(MemoryStore::new()),
    };
    let sup = Supervisor::open(cfg, endpoint, models, history, store)?;
    if let Some(p) = &a.plan {
        require(p, "plan")?;
        let plan = FinalActionPlan::from_json(&fs::read_to_string(p)?)?;
        let report =
            match read_json::<PlannerReport>(&p.with_file_name("report.json"), "planner report") {
                Ok(r) => r,
                Err(_) => PlannerReport {
                    fcr_est: plan.fcr_est,
                    fcr_res: plan.fcr_res,
                    boundary: vec![],
                    weeks: vec![],
                    runtime_s: 0.0,
                },
            };
        let record = PlanRecord {
            job: 0,
            model_version: sup.models().version,
            plan,
            report,
            approved_at: chrono::Utc::now(),
        };
        sup.install_plan(record, "cli").await?;
    }
    let listener = tokio::net::TcpListener::bind(listen_addr(&a.api)).await?;
    let api_addr = listener.local_addr()?;
    announce(&json!({ "api": api_addr.to_string(), "condo": endpoint.to_string() }));

    let poller = {
        let sup = sup.clone();
        let every = Duration::from_millis(a.poll_ms.max(10));
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(every);
            loop {
                tick.tick().await;
                if let Err(e) = sup.step().await {
                    log::error!("supervision round failed: {e}");
                }
            }
        })
    };
    api::serve(Arc::clone(&sup), listener, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    poller.abort();
    if let Some(c) = condo {
        c.stop().await;
    }
    Ok(json!({ "stopped": true }))
}

pub fn plot(a: &PlotArgs) -> Result<serde_json::Value> {
    let report: PlannerReport = read_json(&a.report, "planner report")?;
    fs::create_dir_all(&a.out)?;
    let mut files = vec![
        crate::plot::convergence(&report, &a.out.join("convergence.svg"))?,
        crate::plot::boundary(&report, &a.out.join("boundary.svg"))?,
    ];
    if let Some(p) = &a.samples {
        require(p, "sample corpus")?;
        let samples = load_samples(p)?;
        files.push(crate::plot::climate_history(
            &samples,
            &a.out.join("climate.svg"),
        )?);
    }
    if let Some(p) = &a.trajectory {
        require(p, "trajectory")?;
        files.push(crate::plot::trajectory(
            &crate::plot::read_trajectory_csv(&fs::read_to_string(p)?)?,
            &a.out.join("trajectory.svg"),
        )?);
    }
    Ok(json!({ "files": files }))
}
