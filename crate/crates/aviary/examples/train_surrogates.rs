//! Trains the six weekly LSTMs on ten flocks and scores them on two more.

use aviary::dataset::{generate_corpus, partition_weeks, GeneratorConfig};
use aviary::surrogate::{evaluate_r2, train_models, Hyperparams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let flocks = generate_corpus(&GeneratorConfig::default(), 12)?;
    let (train, test) = flocks.split_at(10);
    let models = train_models(train, &Hyperparams::default())?;
    let weeks = partition_weeks(test)?;

    println!("        R² MdW   R² dFCpB   R² NlBpA");
    for (m, w) in models.iter().zip(&weeks) {
        let r = evaluate_r2(m, w)?;
        println!(
            "{}  {:.4}   {:.4}     {:.4}",
            m.week, r.mdw, r.dfcpb, r.nlbpa
        );
    }
    Ok(())
}
