//! Plans a whole flock: the final week first, then each earlier week
//! aimed at the starting state the next one needs.

use aviary::dataset::{generate_corpus, GeneratorConfig};
use aviary::evolve::GaConfig;
use aviary::planner::{optimize_flock, restrictions_from_samples};
use aviary::surrogate::{train_models, Hyperparams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let flocks = generate_corpus(&GeneratorConfig::default(), 12)?;
    let models = train_models(&flocks, &Hyperparams::default())?;
    let restrictions = restrictions_from_samples(&flocks)?;
    let ga = GaConfig {
        pop_size: 100,
        max_iterations: 600,
        ..GaConfig::default()
    };
    let (plan, report) = optimize_flock(&models, &restrictions, &ga, |_| {})?;

    for w in &report.weeks {
        println!(
            "{}: fitness {:.5} after {} generations ({:?})",
            w.week, w.best_fitness, w.generations, w.stop
        );
    }
    println!(
        "estimated FCR {:.4}, rolled out {:.4}, worst boundary error {:.2}%",
        plan.fcr_est,
        plan.fcr_res,
        report.worst_relative_pct()
    );
    print!(
        "{}",
        plan.to_csv()?
            .lines()
            .take(8)
            .collect::<Vec<_>>()
            .join("\n")
    );
    println!("\n...");
    Ok(())
}
