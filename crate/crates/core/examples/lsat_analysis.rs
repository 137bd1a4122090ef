//! The bundled LSAT corpus: item estimates, 99% intervals and a Bonferroni comparison.
//!
//! cargo run --release --example lsat_analysis

use rasch_pairing::estimators::{estimate, EstimatorConfig, Method};
use rasch_pairing::inference::{confidence_intervals, plugin_covariance, CovarianceOptions};
use rasch_pairing::lsat;

fn main() -> rasch_pairing::Result<()> {
    lsat::verify_corpus()?;
    let data = lsat::corpus();
    println!("correct answers per problem: {:?}", lsat::correct_totals(&data));

    let est = estimate(&data, &EstimatorConfig::new(Method::Mrp).n_split(100))?;
    let cov = plugin_covariance(&data, &est, CovarianceOptions::default())?;
    let report = confidence_intervals(&est, &cov, 0.01, false)?;
    println!("problem   θ̂       99% interval");
    for i in 0..lsat::N_ITEMS {
        println!("{:>7} {:>7.4}  [{:.4}, {:.4}]", i + 1, report.theta_hat[i], report.ci_lower[i], report.ci_upper[i]);
    }

    let bonf = confidence_intervals(&est, &cov, 0.05, true)?;
    let hardest = (0..lsat::N_ITEMS).max_by(|&a, &b| est.theta_hat[a].total_cmp(&est.theta_hat[b])).unwrap();
    let separated = (0..lsat::N_ITEMS).filter(|&i| i != hardest).all(|i| bonf.ci_lower[hardest] > bonf.ci_upper[i]);
    println!("problem {} is the hardest; separated from all others at 95% with Bonferroni: {separated}", hardest + 1);
    Ok(())
}
