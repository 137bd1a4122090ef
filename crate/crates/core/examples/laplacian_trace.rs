//! The ℓ2 error of RP-MLE tracks √Trace(L†) of the BTL-weighted comparison Laplacian.
//!
//! cargo run --release --example laplacian_trace

use rasch_pairing::estimators::split_comparisons;
use rasch_pairing::laplacian::{build_count_laplacian, build_z_laplacian, spectral_diagnostics};
use rasch_pairing::model::{condition_numbers, sample_ground_truth, sample_responses, ParamSpec, SamplingScheme};
use rasch_pairing::solver::{solve_newton, BtlObjective, SolverOptions};

fn main() -> rasch_pairing::Result<()> {
    let (n, m, p) = (10_000, 20, 0.1);
    for seed in 0..5 {
        let gt = sample_ground_truth(n, m, &ParamSpec::StandardNormal, &ParamSpec::StandardNormal, seed)?;
        let data = sample_responses(&gt, SamplingScheme::Bernoulli { p }, seed)?;
        let pc = split_comparisons(&data, seed, 0);
        let fit = solve_newton(&BtlObjective::from_comparisons(&pc), &SolverOptions::default())?;

        let err = fit.theta_hat.iter().zip(gt.theta()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let predicted = build_z_laplacian(&pc, &fit.theta_hat)?.pinv_trace()?.sqrt();
        let diag = spectral_diagnostics(&build_count_laplacian(&pc), n, p, &condition_numbers(&gt));
        println!(
            "seed {seed}: ‖θ̂−θ*‖ = {err:.4}, √Trace(L†) = {predicted:.4}, λ_max = {:.0}, λ_fiedler = {:.0}",
            diag.lambda_max, diag.lambda_fiedler
        );
    }
    Ok(())
}
