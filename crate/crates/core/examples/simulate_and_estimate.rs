//! Simulate sparse Rasch responses and compare the four estimators against the truth.
//!
//! cargo run --example simulate_and_estimate

use rasch_pairing::estimators::{estimate, EstimatorConfig, Method};
use rasch_pairing::model::{condition_numbers, sample_ground_truth, sample_responses, ParamSpec, SamplingScheme};

fn main() -> rasch_pairing::Result<()> {
    let (n, m, p, seed) = (5000, 30, 0.2, 42);
    let gt = sample_ground_truth(n, m, &ParamSpec::StandardNormal, &ParamSpec::StandardNormal, seed)?;
    let data = sample_responses(&gt, SamplingScheme::Bernoulli { p }, seed)?;
    let kappa = condition_numbers(&gt);
    println!(
        "{} responses from {n} users on {m} items, κ₁ = {:.1}, κ₂ = {:.1}",
        data.len(),
        kappa.kappa1,
        kappa.kappa2
    );

    for cfg in [
        EstimatorConfig::new(Method::Rp).seed(seed),
        EstimatorConfig::new(Method::Mrp).n_split(20).seed(seed),
        EstimatorConfig::new(Method::Wp),
        EstimatorConfig::new(Method::Pmle),
    ] {
        let est = estimate(&data, &cfg)?;
        let linf = est.theta_hat.iter().zip(gt.theta()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let l2 = est.theta_hat.iter().zip(gt.theta()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        println!(
            "{:>4}: ℓ∞ {linf:.4}  ℓ2 {l2:.4}  ({} Newton iterations, ‖∇‖∞ {:.1e})",
            est.method.as_str(),
            est.fit.iterations,
            est.fit.grad_inf_norm
        );
    }
    Ok(())
}
