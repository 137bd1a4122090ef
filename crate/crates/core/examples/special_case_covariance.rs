//! The closed-form covariance for θ* = 0, a point-mass user distribution and
//! uniform mp-item sampling, next to the plug-in estimate from one simulation.
//!
//! cargo run --release --example special_case_covariance

use rasch_pairing::estimators::{estimate, EstimatorConfig, Method};
use rasch_pairing::inference::{beta_for_point_mass, plugin_covariance, special_case_factor, CovarianceOptions};
use rasch_pairing::model::{sample_ground_truth, sample_responses, ParamSpec, SamplingScheme};

fn main() -> rasch_pairing::Result<()> {
    let (n, m, p) = (10_000, 20, 0.2);
    let beta = beta_for_point_mass(0.0);
    let gt = sample_ground_truth(n, m, &ParamSpec::Zeros, &ParamSpec::Zeros, 1)?;
    let data = sample_responses(&gt, SamplingScheme::uniform_from_p(m, p)?, 1)?;
    for n_split in [1, 10] {
        let est = estimate(&data, &EstimatorConfig::new(Method::Mrp).n_split(n_split).seed(1))?;
        let cov = plugin_covariance(&data, &est, CovarianceOptions { finite_split_mixture: true })?;
        let plug_in = cov.sigma[(0, 0)] * n as f64;
        let closed = special_case_factor(m, p, beta, Some(n_split))? * (1.0 - 1.0 / m as f64);
        println!("n_split {n_split:>2}: n·Σ̂₀₀ = {plug_in:.2}, closed form {closed:.2}, ratio {:.3}", plug_in / closed);
    }
    println!("(the closed form as stated is four times the simulated covariance)");
    let ratio = special_case_factor(m, p, beta, None)? / special_case_factor(m, p, beta, Some(1))?;
    println!("infinite-split shrink factor: {ratio:.4} = mp/(2(mp−1))");
    Ok(())
}
