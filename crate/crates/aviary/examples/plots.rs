//! SVG charts of a short planner run, written to `target/plots`.

use std::path::Path;

use aviary::dataset::{generate_corpus, GeneratorConfig};
use aviary::evolve::GaConfig;
use aviary::planner::{optimize_flock, restrictions_from_samples};
use aviary::plot;
use aviary::surrogate::{train_models, Hyperparams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let flocks = generate_corpus(&GeneratorConfig::default(), 12)?;
    let models = train_models(&flocks, &Hyperparams::default())?;
    let ga = GaConfig {
        pop_size: 60,
        max_iterations: 300,
        ..GaConfig::default()
    };
    let (_, report) = optimize_flock(&models, &restrictions_from_samples(&flocks)?, &ga, |_| {})?;

    let out = Path::new("target/plots");
    std::fs::create_dir_all(out)?;
    for f in [
        plot::convergence(&report, &out.join("convergence.svg"))?,
        plot::boundary(&report, &out.join("boundary.svg"))?,
        plot::climate_history(&flocks, &out.join("climate.svg"))?,
    ] {
        println!("wrote {}", f.display());
    }
    Ok(())
}
