//! Exhaustive search over the mean temperature and humidity of the first
//! two days of the final week, against the GA on the same box.

use aviary::dataset::{generate_corpus, GeneratorConfig};
use aviary::evolve::{run_ga, GaConfig};
use aviary::planner::{
    box_midpoint, day_axes, exhaustive_oracle, fitness_week6, grid_cardinality,
    restrictions_for_axes, restrictions_from_samples,
};
use aviary::surrogate::{train_models, Hyperparams};
use aviary::Week;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let flocks = generate_corpus(&GeneratorConfig::default(), 12)?;
    let models = train_models(&flocks, &Hyperparams::default())?;
    let r = &restrictions_from_samples(&flocks)?[5];
    let week6 = Week::new(6).expect("final week");
    let obj = |g: &[f64]| fitness_week6(g, &models[5]).unwrap_or(f64::NAN);

    let base = box_midpoint(r)?;
    let axes = day_axes(r, week6, 2, &[2, 5], 0.5, 1.0)?;
    println!("grid of {} points", grid_cardinality(&axes));
    let best = exhaustive_oracle(&obj, &base, &axes, 10_000_000)?;
    println!("oracle: FCR {:.6}", best.fitness);

    let boxed = restrictions_for_axes(&base, &axes)?;
    for seed in 1..=5 {
        let cfg = GaConfig {
            seed,
            pop_size: 50,
            max_iterations: 300,
            stall_generations: 50,
            ..GaConfig::default()
        };
        let ga = run_ga(&obj, &boxed, &cfg)?;
        println!(
            "GA seed {seed}: FCR {:.6} ({:+.4}%)",
            ga.best_fitness,
            100.0 * (ga.best_fitness - best.fitness) / best.fitness
        );
    }
    Ok(())
}
