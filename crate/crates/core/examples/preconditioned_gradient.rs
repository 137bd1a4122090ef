//! Newton's method and preconditioned gradient descent reach the same MLE.
//!
//! cargo run --example preconditioned_gradient

use rasch_pairing::estimators::split_comparisons;
use rasch_pairing::laplacian::build_count_laplacian;
use rasch_pairing::model::{sample_ground_truth, sample_responses, ParamSpec, SamplingScheme};
use rasch_pairing::solver::{default_pgd_step, solve_newton, solve_pgd, BtlObjective, PgdOptions, SolverOptions};

fn main() -> rasch_pairing::Result<()> {
    let gt = sample_ground_truth(2000, 15, &ParamSpec::StandardNormal, &ParamSpec::StandardNormal, 5)?;
    let data = sample_responses(&gt, SamplingScheme::Bernoulli { p: 0.3 }, 5)?;
    let pc = split_comparisons(&data, 5, 0);
    let obj = BtlObjective::from_comparisons(&pc);

    let newton = solve_newton(&obj, &SolverOptions::default())?;
    let precond = build_count_laplacian(&pc);
    println!("default PGD step η = {:.4}", default_pgd_step(&obj, &precond)?);
    let pgd = solve_pgd(&obj, &precond, &PgdOptions::default())?;
    let gap = newton.theta_hat.iter().zip(&pgd.theta_hat).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("Newton: {} iterations; PGD: {} iterations; max difference {gap:.1e}", newton.iterations, pgd.iterations);
    Ok(())
}
