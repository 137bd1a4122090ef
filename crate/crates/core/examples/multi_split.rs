//! Averaging over more random pairings shrinks the squared error toward the
//! weighted-pair estimate, roughly linearly in 1/n_split.
//!
//! cargo run --release --example multi_split

use rasch_pairing::estimators::{estimate, EstimatorConfig, Method};
use rasch_pairing::experiment::linear_fit;
use rasch_pairing::model::{sample_ground_truth, sample_responses, ParamSpec, SamplingScheme};

fn main() -> rasch_pairing::Result<()> {
    let (n, m, trials) = (10_000, 50, 20);
    let splits = [1usize, 2, 5, 10, 20, 50];
    let mut mse = vec![0.0; splits.len()];
    for seed in 0..trials {
        let gt = sample_ground_truth(n, m, &ParamSpec::Zeros, &ParamSpec::Zeros, seed)?;
        let data = sample_responses(&gt, SamplingScheme::uniform_from_p(m, 0.2)?, seed)?;
        let cfg = EstimatorConfig::new(Method::Mrp).n_split(50).seed(seed).keep_splits(true);
        let per_split = estimate(&data, &cfg)?.per_split.unwrap_or_default();
        for (k, &ns) in splits.iter().enumerate() {
            // The first ns splits are exactly what MRP-MLE with ns splits would use.
            let sq: f64 = (0..m).map(|i| (per_split[..ns].iter().map(|s| s[i]).sum::<f64>() / ns as f64).powi(2)).sum();
            mse[k] += sq / trials as f64;
        }
    }
    for (ns, e) in splits.iter().zip(&mse) {
        println!("n_split {ns:>2}: mean ‖θ̂‖² = {e:.5}");
    }
    let inv: Vec<f64> = splits.iter().map(|&s| 1.0 / s as f64).collect();
    let fit = linear_fit(&inv, &mse)?;
    println!("fit against 1/n_split: slope {:.4}, intercept {:.4}, R² {:.3}", fit.slope, fit.intercept, fit.r2);
    println!("MSE(50)/MSE(1) = {:.3} (mp/(2(mp−1)) = {:.3})", mse[5] / mse[0], 10.0 / 18.0);
    Ok(())
}
