//! Simulation checks of the sampling model, the pairing identities and the
//! plug-in covariance. Every check runs on fixed seeds.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rasch_pairing::estimators::{estimate, EstimatorConfig, ItemEstimate, Method};
use rasch_pairing::inference::{
    beta_for_point_mass, confidence_intervals, plugin_covariance, special_case_covariance, CovarianceOptions,
};
use rasch_pairing::model::{
    sample_ground_truth, sample_responses, GroundTruth, ParamSpec, Response, ResponseData, SamplingScheme,
};
use rasch_pairing::pairing::{btl_win_prob, compile_comparisons, random_split, PairedTuple, SplitAssignment};
use rasch_pairing::rng::{derive_seed, stream_rng, Stream};
use rayon::prelude::*;

fn zero_theta_truth(n: usize, m: usize, zeta: &ParamSpec, seed: u64) -> GroundTruth {
    sample_ground_truth(n, m, &ParamSpec::Zeros, zeta, seed).unwrap()
}

fn sample_variance(xs: &[f64]) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn fair_responses_average_one_half() {
    let gt = GroundTruth::new(vec![0.0; 2], vec![0.0; 100_000]).unwrap();
    let data = sample_responses(&gt, SamplingScheme::Bernoulli { p: 1.0 }, 3).unwrap();
    assert_eq!(data.len(), 200_000);
    let mean = data.edges().iter().map(|r| f64::from(r.value)).sum::<f64>() / data.len() as f64;
    assert!((0.497..=0.503).contains(&mean), "mean response {mean}");
}

#[test]
fn disagreeing_pairs_follow_btl() {
    // Users of very different abilities; conditioning on disagreement removes ζ.
    let theta = vec![-0.4, 0.6];
    let zeta: Vec<f64> = (0..300_000).map(|t| ((t % 7) as f64 - 3.0) * 0.7).collect();
    let gt = GroundTruth::new(theta.clone(), zeta).unwrap();
    let data = sample_responses(&gt, SamplingScheme::Bernoulli { p: 1.0 }, 11).unwrap();
    let (mut disagree, mut item1_wins) = (0usize, 0usize);
    for t in 0..data.n_users() {
        let r = data.user_responses(t);
        if r[0].1 != r[1].1 {
            disagree += 1;
            item1_wins += usize::from(r[1].1 == 1);
        }
    }
    assert!(disagree >= 100_000, "only {disagree} conditioned samples");
    let freq = item1_wins as f64 / disagree as f64;
    let expected = btl_win_prob(gt.theta()[0], gt.theta()[1]);
    assert!((freq - expected).abs() <= 0.01, "freq {freq} vs {expected}");
}

#[test]
fn split_inclusion_frequency_matches_weight() {
    // A user with m_t = 5 keeps m̃_t = 4 items, so each pair is matched with
    // probability m̃_t/(m_t(m_t−1)) = 1/5 per split.
    let edges = (0..5).map(|i| Response { user: 0, item: i, value: 0 }).collect();
    let data = ResponseData::new(1, 5, edges).unwrap();
    let splits = 1_000_000;
    let mut rng = stream_rng(21, Stream::Split(0));
    let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
    for _ in 0..splits {
        for p in random_split(&data, &mut rng).pairs {
            *counts.entry((p.item_i, p.item_j)).or_default() += 1;
        }
    }
    assert_eq!(counts.len(), 10);
    let expected = splits as f64 * 4.0 / 20.0;
    for (pair, &c) in &counts {
        assert!(rel_err(c as f64, expected) <= 0.01, "pair {pair:?}: {c} vs {expected}");
    }
}

#[test]
fn perfect_matchings_of_four_items_are_uniform() {
    let edges = (0..4).map(|i| Response { user: 0, item: i, value: 1 }).collect();
    let data = ResponseData::new(1, 4, edges).unwrap();
    let draws = 100_000;
    let mut rng = stream_rng(5, Stream::Split(0));
    let mut counts = [0usize; 3];
    for _ in 0..draws {
        let split = random_split(&data, &mut rng);
        // Identify the matching by the partner of item 0.
        let partner = split.pairs.iter().find(|p| p.item_j == 0).map(|p| p.item_i).unwrap();
        counts[partner - 1] += 1;
    }
    for c in counts {
        assert!((c as f64 / draws as f64 - 1.0 / 3.0).abs() <= 0.01, "{counts:?}");
    }
}

#[test]
fn record_outcomes_are_conditionally_independent() {
    // Fixed split {(1,0), (3,2)} per user; keep users where both pairs disagree.
    let n = 600_000;
    let zeta: Vec<f64> = (0..n).map(|t| ((t % 9) as f64 - 4.0) * 0.4).collect();
    let gt = GroundTruth::new(vec![0.3, -0.2, 0.1, -0.5], zeta).unwrap();
    let data = sample_responses(&gt, SamplingScheme::Bernoulli { p: 1.0 }, 8).unwrap();
    let pairs = (0..n)
        .flat_map(|user| [PairedTuple { user, item_i: 1, item_j: 0 }, PairedTuple { user, item_i: 3, item_j: 2 }])
        .collect();
    let pc = compile_comparisons(&data, &SplitAssignment { pairs }).unwrap();
    let mut by_user: HashMap<usize, Vec<(usize, u8)>> = HashMap::new();
    for r in pc.records() {
        by_user.entry(r.user).or_default().push((r.item_i, r.outcome));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for recs in by_user.values().filter(|r| r.len() == 2) {
        let (a, b) = if recs[0].0 == 1 { (recs[0], recs[1]) } else { (recs[1], recs[0]) };
        xs.push(f64::from(a.1));
        ys.push(f64::from(b.1));
    }
    assert!(xs.len() >= 100_000, "only {} users with two records", xs.len());
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let cov = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / k;
    let corr = cov / (sample_variance(&xs) * sample_variance(&ys)).sqrt();
    assert!(corr.abs() < 0.01, "correlation {corr}");
}

#[test]
fn plugin_variance_matches_empirical_variance() {
    let (n, m, trials) = (10_000, 20, 1000);
    let runs: Vec<(Vec<f64>, Vec<f64>)> = (0..trials as u64)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(404, r);
            let gt = zero_theta_truth(n, m, &ParamSpec::StandardNormal, seed);
            let data = sample_responses(&gt, SamplingScheme::Bernoulli { p: 0.5 }, seed).unwrap();
            let est = estimate(&data, &EstimatorConfig::new(Method::Wp)).unwrap();
            let cov = plugin_covariance(&data, &est, CovarianceOptions::default()).unwrap();
            (est.theta_hat, cov.sigma.diagonal().iter().copied().collect())
        })
        .collect();
    for i in 0..m {
        let xs: Vec<f64> = runs.iter().map(|(t, _)| t[i]).collect();
        let empirical = sample_variance(&xs);
        let plugin = runs.iter().map(|(_, v)| v[i]).sum::<f64>() / trials as f64;
        assert!(rel_err(plugin, empirical) <= 0.15, "item {i}: plug-in {plugin} vs empirical {empirical}");
    }
}

/// Mean of n·Σ̂ over trials of the point-mass special case, with the finite-split mixture.
fn special_case_mean_covariance(n: usize, m: usize, per_user: usize, n_split: usize, trials: u64) -> DMatrix<f64> {
    let sum = (0..trials)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(77, r);
            let gt = zero_theta_truth(n, m, &ParamSpec::Zeros, seed);
            let data = sample_responses(&gt, SamplingScheme::UniformCount { per_user }, seed).unwrap();
            let cfg = EstimatorConfig::new(Method::Mrp).n_split(n_split).seed(seed);
            let est = estimate(&data, &cfg).unwrap();
            let opts = CovarianceOptions { finite_split_mixture: true };
            plugin_covariance(&data, &est, opts).unwrap().sigma * n as f64
        })
        .reduce(|| DMatrix::zeros(m, m), |a, b| a + b);
    sum / trials as f64
}

fn max_entry_rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| rel_err(*x, *y)).fold(0.0, f64::max)
}

// Known red: the closed form is four times the simulated covariance, see the
// note on `special_case_factor`. Kept to the stated tolerance.
#[test]
fn special_case_plugin_covariance_matches_closed_form() {
    let (n, m, p) = (10_000, 20, 0.2);
    let beta = beta_for_point_mass(0.0);
    let simulated = special_case_mean_covariance(n, m, 4, 1, 200);
    let closed = special_case_covariance(m, p, beta, Some(1)).unwrap();
    let err = max_entry_rel_err(&simulated, &closed);
    assert!(
        err <= 0.15,
        "max entrywise relative error {err:.3}: simulated diag {:.3} vs closed form {:.3}",
        simulated[(0, 0)],
        closed[(0, 0)]
    );
}

#[test]
fn special_case_closed_form_is_four_times_simulation() {
    let (n, m, p) = (10_000, 20, 0.2);
    let beta = beta_for_point_mass(0.0);
    for n_split in [1, 10] {
        let simulated = special_case_mean_covariance(n, m, 4, n_split, 100);
        let quarter = special_case_covariance(m, p, beta, Some(n_split)).unwrap() / 4.0;
        let err = max_entry_rel_err(&simulated, &quarter);
        assert!(err <= 0.15, "n_split {n_split}: {err:.3}");
    }
}

fn mean_width(n: usize, trials: u64) -> f64 {
    let widths: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(n as u64, r);
            let gt = zero_theta_truth(n, 20, &ParamSpec::StandardNormal, seed);
            let data = sample_responses(&gt, SamplingScheme::Bernoulli { p: 0.5 }, seed).unwrap();
            let est = estimate(&data, &EstimatorConfig::new(Method::Wp)).unwrap();
            let cov = plugin_covariance(&data, &est, CovarianceOptions::default()).unwrap();
            let ci = confidence_intervals(&est, &cov, 0.05, false).unwrap();
            ci.ci_upper.iter().zip(&ci.ci_lower).map(|(u, l)| u - l).sum::<f64>() / 20.0
        })
        .collect();
    widths.iter().sum::<f64>() / widths.len() as f64
}

#[test]
fn interval_width_shrinks_like_inverse_root_n() {
    let ratio = mean_width(5_000, 50) / mean_width(10_000, 50);
    assert!(rel_err(ratio, 2f64.sqrt()) <= 0.10, "width ratio {ratio}");
}

#[test]
fn sampled_v_same_dominates_v_diff() {
    for seed in 0..5u64 {
        let gt = sample_ground_truth(4000, 12, &ParamSpec::StandardNormal, &ParamSpec::StandardNormal, seed).unwrap();
        let data = sample_responses(&gt, SamplingScheme::Bernoulli { p: 0.5 }, seed).unwrap();
        let cfg = EstimatorConfig::new(Method::Mrp).n_split(20).seed(seed);
        let est = estimate(&data, &cfg).unwrap();
        let cov = plugin_covariance(&data, &est, CovarianceOptions { finite_split_mixture: true }).unwrap();
        let v_same = cov.v_same.unwrap();
        let gap = SymmetricEigen::new(&v_same - &cov.v_diff).eigenvalues.min();
        assert!(gap >= -1e-6 * v_same.norm(), "seed {seed}: min eigenvalue {gap}");
    }
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn many_splits_approach_the_weighted_estimate() {
    let gt = sample_ground_truth(3000, 15, &ParamSpec::StandardNormal, &ParamSpec::StandardNormal, 9).unwrap();
    let data = sample_responses(&gt, SamplingScheme::Bernoulli { p: 0.4 }, 9).unwrap();
    let wp = estimate(&data, &EstimatorConfig::new(Method::Wp)).unwrap();
    let gap = |ns: usize| -> f64 {
        let est: ItemEstimate = estimate(&data, &EstimatorConfig::new(Method::Mrp).n_split(ns).seed(9)).unwrap();
        linf(&est.theta_hat, &wp.theta_hat)
    };
    let (g10, g100) = (gap(10), gap(100));
    assert!(g100 <= 3.0 * g10, "gap at 100 splits {g100}, at 10 splits {g10}");
    assert!(g100 < g10);
}

#[test]
fn exchangeable_items_have_uniform_argmax() {
    let m = 4;
    let mut counts = [0usize; 4];
    for seed in 0..100u64 {
        let gt = zero_theta_truth(2000, m, &ParamSpec::StandardNormal, seed);
        let data = sample_responses(&gt, SamplingScheme::Bernoulli { p: 1.0 }, seed).unwrap();
        let est = estimate(&data, &EstimatorConfig::new(Method::Rp).seed(seed)).unwrap();
        assert!(est.theta_hat.iter().all(|v| v.abs() < 0.25));
        let top = (0..m).max_by(|&a, &b| est.theta_hat[a].total_cmp(&est.theta_hat[b])).unwrap();
        counts[top] += 1;
    }
    // Each count is Binomial(100, 1/4): mean 25, sd ≈ 4.3.
    assert!(counts.iter().all(|&c| (10..=40).contains(&c)), "{counts:?}");
}
