//! A thousand random plans inside the weekly search boxes, rolled out
//! through the surrogates: the baseline an optimised plan has to beat.

use aviary::dataset::{generate_corpus, GeneratorConfig};
use aviary::planner::{benchmark_random_specialists, restrictions_from_samples};
use aviary::surrogate::{train_models, Hyperparams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let flocks = generate_corpus(&GeneratorConfig::default(), 12)?;
    let models = train_models(&flocks, &Hyperparams::default())?;
    let b = benchmark_random_specialists(&models, &restrictions_from_samples(&flocks)?, 1000, 1)?;
    println!(
        "best {:.4}  median {:.4}  mean {:.4} ± {:.4}  worst {:.4}",
        b.best_fcr, b.median_fcr, b.mean_fcr, b.sd_fcr, b.worst_fcr
    );
    let best_empiric = flocks
        .iter()
        .filter_map(|f| f.final_fcr().ok())
        .fold(f64::INFINITY, f64::min);
    println!("best historical flock {best_empiric:.4}");
    Ok(())
}
