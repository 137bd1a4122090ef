//! Run a small ℓ∞-vs-n experiment from a JSON config and print the result table.
//!
//! cargo run --release --example run_experiment

use rasch_pairing::experiment::{run_experiment, ExperimentConfig};

fn main() -> rasch_pairing::Result<()> {
    let config = ExperimentConfig::from_json(
        r#"{
            "name": "linf-vs-n",
            "n": [2000, 8000],
            "m": [20],
            "p": [0.2],
            "methods": ["rp", "mrp", "wp"],
            "n_split": [10],
            "trials": 20,
            "seed_base": 3
        }"#,
    )?;
    let result = run_experiment(&config)?;
    result.write_csv(std::io::stdout())?;
    for method in ["rp", "mrp", "wp"] {
        let means: Vec<f64> =
            result.rows_for("linf").filter(|r| r.method.map(|m| m.as_str()) == Some(method)).map(|r| r.mean).collect();
        println!("{method}: ℓ∞ ratio n=2000 / n=8000 = {:.2}", means[0] / means[1]);
    }
    Ok(())
}
