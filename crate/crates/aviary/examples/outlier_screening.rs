//! Screens new flocks against the history. One of them suffers an outbreak
//! on days 12 to 20 and is rejected.

use aviary::dataset::{
    detect_outlier_flock, generate_corpus, generate_corpus_from, FlockState, GeneratorConfig,
    OutlierConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = GeneratorConfig::default();
    let history = generate_corpus(&cfg, 12)?;
    let mut fresh = generate_corpus_from(&cfg, &cfg, 12, 3)?;

    let src = fresh[0].clone();
    let mut state = FlockState::new(&cfg, src.house, src.initial_birds, src.flock_id)?;
    for (k, p) in src.plans.iter().enumerate() {
        let extra = if (12..=20).contains(&p.day) {
            src.outcomes[k].dm.max(1) * 19
        } else {
            0
        };
        fresh[0].outcomes[k] = state.step(&cfg, p, extra)?;
    }

    for f in &fresh {
        let d = detect_outlier_flock(f, &history, &OutlierConfig::default())?;
        let verdict = if d.reject { "rejected" } else { "accepted" };
        println!(
            "flock {}: {verdict}, flagged days {:?}",
            f.flock_id, d.flagged_days
        );
    }
    Ok(())
}
