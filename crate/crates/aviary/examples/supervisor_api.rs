//! The supervision service over a simulated condominium, driven through
//! its HTTP API: optimise, approve, run a few days, enter mortality.

use std::time::Duration;

use aviary::condosim::{run_condominium, CondoConfig};
use aviary::dataset::{generate_corpus, GeneratorConfig};
use aviary::evolve::GaConfig;
use aviary::supervisor::{api, MemoryStore, Supervisor, SupervisorConfig};
use aviary::surrogate::{train_models, Hyperparams};
use serde_json::{json, Value};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let history = generate_corpus(&GeneratorConfig::default(), 12)?;
    let models = train_models(&history, &Hyperparams::default())?;
    let condo = run_condominium(&CondoConfig::with_houses(3), "127.0.0.1:0").await?;
    let mut cfg = SupervisorConfig::new(vec![1, 2, 3]);
    cfg.ga = GaConfig {
        pop_size: 60,
        max_iterations: 200,
        ..GaConfig::default()
    };
    let sup = Supervisor::open(
        cfg,
        condo.local_addr(),
        models,
        history,
        Box::new(MemoryStore::new()),
    )?;
    sup.step().await?;

    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}/api/v1", listener.local_addr()?);
    tokio::spawn(api::serve(sup.clone(), listener, std::future::pending()));
    let http = reqwest::Client::new();

    let job: Value = http
        .post(format!("{base}/plan/optimize"))
        .send()
        .await?
        .json()
        .await?;
    let id = job["job_id"].as_u64().ok_or("no job id")?;
    loop {
        let j: Value = http
            .get(format!("{base}/jobs/{id}"))
            .send()
            .await?
            .json()
            .await?;
        println!(
            "job {id}: {} weeks done, best {}",
            j["progress"]["weeks_done"], j["progress"]["best_fitness"]
        );
        if j["state"] != "running" {
            break;
        }
        tokio::time::sleep(Duration::from_millis(500)).await;
    }
    let approved: Value = http
        .post(format!("{base}/plan/approve"))
        .json(&json!({ "job_id": id, "operator": "ana" }))
        .send()
        .await?
        .json()
        .await?;
    println!(
        "approved, FCR {} expected; day 1 acks {}",
        approved["plan"]["plan"]["fcr_res"], approved["distributions"][0]["houses"]
    );

    for _ in 0..5 {
        condo.advance_day();
        sup.step().await?;
    }
    let ack: Value = http
        .post(format!("{base}/houses/2/mortality"))
        .json(&json!({ "day": 5, "count": 40, "operator": "ana" }))
        .send()
        .await?
        .json()
        .await?;
    println!(
        "mortality entry accepted, living birds now {}",
        ack["projected_nlb"]
    );
    let houses: Value = http
        .get(format!("{base}/houses"))
        .send()
        .await?
        .json()
        .await?;
    for h in houses.as_array().ok_or("no houses")? {
        println!(
            "house {}: day {}, {} birds",
            h["address"], h["latest"]["day"], h["latest"]["nlb"]
        );
    }
    condo.stop().await;
    Ok(())
}
