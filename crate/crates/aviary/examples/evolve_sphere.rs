//! The genetic algorithm alone, on a shifted sphere inside a box.

use aviary::evolve::{run_ga, GaConfig, Restrictions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dim = 8;
    let r = Restrictions::new(vec![1.0; dim], vec![10.0; dim])?;
    let sphere = |g: &[f64]| g.iter().map(|x| (x - 3.0).powi(2)).sum::<f64>();
    let cfg = GaConfig {
        pop_size: 60,
        max_iterations: 400,
        ..GaConfig::default()
    };
    let res = run_ga(&sphere, &r, &cfg)?;
    for s in res.history.iter().step_by(50) {
        println!(
            "generation {:3}: best {:.6}, mean {:.4}",
            s.generation, s.best, s.mean
        );
    }
    println!(
        "stopped after {} generations ({:?}); best {:.2e}",
        res.generations, res.stop, res.best_fitness
    );
    Ok(())
}
