//! A synthetic 12-flock history: weekly set-point intervals and the FCR
//! each specialist achieved.

use aviary::dataset::{generate_corpus, weekly_confidence_interval, GeneratorConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = GeneratorConfig::default();
    let flocks = generate_corpus(&cfg, 12)?;

    println!("week  T avg (95% CI)          H avg (95% CI)");
    for w in weekly_confidence_interval(&flocks, 0.95)? {
        println!(
            "{}     {:.2} [{:.2}, {:.2}]    {:.1} [{:.1}, {:.1}]",
            w.week,
            w.t_avg.mean,
            w.t_avg.lower,
            w.t_avg.upper,
            w.h_avg.mean,
            w.h_avg.lower,
            w.h_avg.upper
        );
    }
    for f in &flocks {
        let last = f.outcomes.last().expect("40 days");
        println!(
            "flock {:2}: {:5} birds placed, {:5} alive, {:.0} g, FCR {:.4}",
            f.flock_id,
            f.initial_birds,
            last.nlb,
            last.mdw,
            f.final_fcr()?
        );
    }
    Ok(())
}
