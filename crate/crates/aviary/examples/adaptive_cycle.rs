//! When do the surrogates need retraining? Fresh flocks from the same farm
//! keep them; flocks raised 2 °C warmer call for a retrain.

use aviary::dataset::{
    detect_outlier_flock, generate_corpus, generate_corpus_from, GeneratorConfig,
};
use aviary::supervisor::{adaptive_cycle, AdaptiveConfig};
use aviary::surrogate::{train_models, Hyperparams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = GeneratorConfig::default();
    let history = generate_corpus(&base, 12)?;
    let models = train_models(&history, &Hyperparams::default())?;
    let cfg = AdaptiveConfig::default();

    let same = generate_corpus_from(&base, &base, 12, 3)?;
    let out = adaptive_cycle(&same, &history, &models, &cfg)?;
    println!("same farm:   {:?}, {}", out.decision, out.reason);

    let warm = base.with_comfort_shift(2.0);
    let mut shifted = Vec::new();
    for id in 100.. {
        let s = generate_corpus_from(&warm, &warm, id, 1)?.remove(0);
        if !detect_outlier_flock(&s, &history, &cfg.outlier)?.reject {
            shifted.push(s);
        }
        if shifted.len() == 3 {
            break;
        }
    }
    let out = adaptive_cycle(&shifted, &history, &models, &cfg)?;
    println!("2 °C warmer: {:?}, {}", out.decision, out.reason);
    Ok(())
}
