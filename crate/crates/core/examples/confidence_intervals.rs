//! Plug-in confidence intervals for MRP-MLE and their empirical coverage.
//!
//! cargo run --release --example confidence_intervals

use rasch_pairing::estimators::{estimate, EstimatorConfig, Method};
use rasch_pairing::inference::{confidence_intervals, empirical_coverage, plugin_covariance, CovarianceOptions};
use rasch_pairing::model::{sample_ground_truth, sample_responses, ParamSpec, SamplingScheme};

fn main() -> rasch_pairing::Result<()> {
    let (n, m, alpha) = (10_000, 20, 0.1);
    let mut trials = Vec::new();
    for seed in 0..30 {
        let gt = sample_ground_truth(n, m, &ParamSpec::StandardNormal, &ParamSpec::StandardNormal, seed)?;
        let data = sample_responses(&gt, SamplingScheme::Bernoulli { p: 0.5 }, seed)?;
        let est = estimate(&data, &EstimatorConfig::new(Method::Mrp).n_split(20).seed(seed))?;
        let cov = plugin_covariance(&data, &est, CovarianceOptions::default())?;
        let report = confidence_intervals(&est, &cov, alpha, false)?;
        if seed == 0 {
            println!("item   θ*       θ̂        90% interval");
            for i in 0..5 {
                println!(
                    "{i:>4} {:>7.3}  {:>7.3}  [{:.3}, {:.3}]",
                    gt.theta()[i],
                    report.theta_hat[i],
                    report.ci_lower[i],
                    report.ci_upper[i]
                );
            }
        }
        trials.push((report, gt));
    }
    println!("empirical coverage over {} intervals: {:.3}", trials.len() * m, empirical_coverage(&trials)?);
    Ok(())
}
