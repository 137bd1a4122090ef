//! Top-K recovery on a planted instance as the gap Δ_K grows, and top-1 recovery
//! on random LSAT subsamples.
//!
//! cargo run --release --example top_k_recovery

use rasch_pairing::estimators::{estimate, top_k, top_k_recovery_rate, EstimatorConfig, Method};
use rasch_pairing::lsat::top1_recovery;
use rasch_pairing::model::{sample_ground_truth, sample_responses, ParamSpec, SamplingScheme};

fn main() -> rasch_pairing::Result<()> {
    let (n, m, k, trials) = (10_000, 50, 5, 10);
    for delta in [0.1, 0.3, 0.5, 0.7] {
        let theta_spec = ParamSpec::planted_top_k(m, k, delta);
        let mut rate = 0.0;
        for seed in 0..trials {
            let gt = sample_ground_truth(n, m, &theta_spec, &ParamSpec::StandardNormal, seed)?;
            let data = sample_responses(&gt, SamplingScheme::Bernoulli { p: 0.1 }, seed)?;
            let truth = top_k(gt.theta(), k)?;
            let est = estimate(&data, &EstimatorConfig::new(Method::Mrp).n_split(10).seed(seed))?;
            rate += top_k_recovery_rate(&est.theta_hat, &truth) / trials as f64;
        }
        println!("Δ_K = {delta:.1}: top-{k} recovery {rate:.2}");
    }

    let lsat = top1_recovery(200, 4, 200, 20, 0)?;
    println!(
        "LSAT subsamples of 200 users × 4 problems: top-1 recovery mrp {:.3}, pmle {:.3} ({} of {} trials usable)",
        lsat.mrp_rate, lsat.pmle_rate, lsat.completed, lsat.trials
    );
    Ok(())
}
