//! RP-MLE, MRP-MLE, WP-MLE and PMLE, plus top-K selection.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ResponseData;
use crate::pairing::{enumerate_weighted_pairs, random_comparisons, PairScheme, PairedComparisons};
use crate::rng::{stream_rng, Stream};
use crate::solver::{solve_newton, BtlObjective, SolveResult, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// One random pairing.
    Rp,
    /// Average over `n_split` independent random pairings.
    Mrp,
    /// Weighted pseudo-likelihood over all within-user pairs.
    Wp,
    /// Unweighted pseudo-likelihood over all within-user pairs.
    Pmle,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Rp => "rp",
            Method::Mrp => "mrp",
            Method::Wp => "wp",
            Method::Pmle => "pmle",
        }
    }

    pub fn is_randomized(self) -> bool {
        matches!(self, Method::Rp | Method::Mrp)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rp" => Ok(Method::Rp),
            "mrp" => Ok(Method::Mrp),
            "wp" => Ok(Method::Wp),
            "pmle" => Ok(Method::Pmle),
            _ => Err(Error::UnknownName { kind: "method", name: s.to_string() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub method: Method,
    /// Number of random pairings (MRP-MLE only).
    pub n_split: usize,
    pub seed: u64,
    pub solver: SolverOptions,
    /// Keep every split's estimate in the result (MRP-MLE only).
    pub keep_splits: bool,
}

impl EstimatorConfig {
    pub fn new(method: Method) -> Self {
        Self { method, n_split: 1, seed: 0, solver: SolverOptions::default(), keep_splits: false }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_split(mut self, n_split: usize) -> Self {
        self.n_split = n_split;
        self
    }

    pub fn keep_splits(mut self, keep: bool) -> Self {
        self.keep_splits = keep;
        self
    }
}

/// Worst-case solver diagnostics across the solves behind an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub iterations: usize,
    pub grad_inf_norm: f64,
    pub converged: bool,
}

impl Default for FitReport {
    fn default() -> Self {
        Self { iterations: 0, grad_inf_norm: 0.0, converged: true }
    }
}

impl FitReport {
    fn absorb(&mut self, r: &SolveResult) {
        self.iterations = self.iterations.max(r.iterations);
        self.grad_inf_norm = self.grad_inf_norm.max(r.grad_inf_norm);
        self.converged &= r.converged;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemEstimate {
    pub method: Method,
    pub theta_hat: Vec<f64>,
    pub n_split: Option<usize>,
    pub seed: Option<u64>,
    #[serde(rename = "per_split_estimates", default, skip_serializing_if = "Option::is_none")]
    pub per_split: Option<Vec<Vec<f64>>>,
    #[serde(skip)]
    pub fit: FitReport,
}

impl ItemEstimate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// The comparisons produced by the `k`-th random pairing of `seed`.
pub fn split_comparisons(data: &ResponseData, seed: u64, k: usize) -> PairedComparisons {
    random_comparisons(data, &mut stream_rng(seed, Stream::Split(k as u64)))
}

fn require_pairs(data: &ResponseData) -> Result<()> {
    if (0..data.n_users()).any(|t| data.user_degree(t) >= 2) {
        Ok(())
    } else {
        Err(Error::NoComparisons)
    }
}

fn solve_split(data: &ResponseData, seed: u64, k: usize, opts: &SolverOptions) -> Result<SolveResult> {
    let pc = split_comparisons(data, seed, k);
    solve_newton(&BtlObjective::from_comparisons(&pc), opts)
}

/// RP-MLE: one random pairing (split 0 of `cfg.seed`), then the BTL MLE.
pub fn rp_mle(data: &ResponseData, cfg: &EstimatorConfig) -> Result<ItemEstimate> {
    require_pairs(data)?;
    let res = solve_split(data, cfg.seed, 0, &cfg.solver)?;
    let mut fit = FitReport::default();
    fit.absorb(&res);
    Ok(ItemEstimate {
        method: Method::Rp,
        theta_hat: res.theta_hat,
        n_split: Some(1),
        seed: Some(cfg.seed),
        per_split: None,
        fit,
    })
}

/// MRP-MLE: the average of RP-MLE over splits `0..n_split`. Any failing split aborts.
pub fn mrp_mle(data: &ResponseData, cfg: &EstimatorConfig) -> Result<ItemEstimate> {
    if cfg.n_split == 0 {
        return Err(Error::InvalidArgument("n_split must be at least 1".into()));
    }
    require_pairs(data)?;
    let results: Vec<Result<SolveResult>> =
        (0..cfg.n_split).into_par_iter().map(|k| solve_split(data, cfg.seed, k, &cfg.solver)).collect();
    let m = data.n_items();
    let mut fit = FitReport::default();
    let mut sum = vec![0.0; m];
    let mut per_split = Vec::with_capacity(if cfg.keep_splits { cfg.n_split } else { 0 });
    for (index, res) in results.into_iter().enumerate() {
        let res = res.map_err(|e| Error::SplitFailed { index, source: Box::new(e) })?;
        fit.absorb(&res);
        sum.iter_mut().zip(&res.theta_hat).for_each(|(s, v)| *s += v);
        if cfg.keep_splits {
            per_split.push(res.theta_hat);
        }
    }
    let theta_hat = sum.into_iter().map(|s| s / cfg.n_split as f64).collect();
    Ok(ItemEstimate {
        method: Method::Mrp,
        theta_hat,
        n_split: Some(cfg.n_split),
        seed: Some(cfg.seed),
        per_split: cfg.keep_splits.then_some(per_split),
        fit,
    })
}

fn pseudo_mle(data: &ResponseData, scheme: PairScheme, method: Method, opts: &SolverOptions) -> Result<ItemEstimate> {
    require_pairs(data)?;
    let obj = BtlObjective::from_weighted_pairs(&enumerate_weighted_pairs(data, scheme));
    let res = solve_newton(&obj, opts)?;
    let mut fit = FitReport::default();
    fit.absorb(&res);
    Ok(ItemEstimate { method, theta_hat: res.theta_hat, n_split: None, seed: None, per_split: None, fit })
}

/// WP-MLE. Deterministic in the data.
pub fn wp_mle(data: &ResponseData, cfg: &EstimatorConfig) -> Result<ItemEstimate> {
    pseudo_mle(data, PairScheme::Weighted, Method::Wp, &cfg.solver)
}

/// PMLE. Deterministic in the data.
pub fn pmle(data: &ResponseData, cfg: &EstimatorConfig) -> Result<ItemEstimate> {
    pseudo_mle(data, PairScheme::Plain, Method::Pmle, &cfg.solver)
}

/// Dispatches on `cfg.method`.
pub fn estimate(data: &ResponseData, cfg: &EstimatorConfig) -> Result<ItemEstimate> {
    match cfg.method {
        Method::Rp => rp_mle(data, cfg),
        Method::Mrp => mrp_mle(data, cfg),
        Method::Wp => wp_mle(data, cfg),
        Method::Pmle => pmle(data, cfg),
    }
}

/// Indices of the `k` largest entries, largest first; ties go to the lower index.
pub fn top_k(theta: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > theta.len() {
        return Err(Error::InvalidArgument(format!("K = {k} is outside 1..={}", theta.len())));
    }
    let mut idx: Vec<usize> = (0..theta.len()).collect();
    idx.sort_by(|&a, &b| theta[b].total_cmp(&theta[a]).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

/// Fraction of `true_top` found among the top-|true_top| entries of `theta`.
pub fn top_k_recovery_rate(theta: &[f64], true_top: &[usize]) -> f64 {
    let k = true_top.len().min(theta.len());
    let Ok(selected) = top_k(theta, k) else {
        return 0.0;
    };
    let hits = true_top.iter().filter(|i| selected.contains(i)).count();
    hits as f64 / k as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Response;

    /// `n` users who each answered items 0 and 1, with item 0 "winning" for `wins0` of them.
    fn two_item_data(n: usize, wins0: usize) -> ResponseData {
        let rows: Vec<Vec<u8>> = (0..n).map(|t| if t < wins0 { vec![1, 0] } else { vec![0, 1] }).collect();
        ResponseData::from_dense(&rows).unwrap()
    }

    #[test]
    fn two_item_fixture_closed_form() {
        let data = two_item_data(4, 1);
        let est = rp_mle(&data, &EstimatorConfig::new(Method::Rp)).unwrap();
        let h = 0.5 * 3f64.ln();
        assert!((est.theta_hat[1] - h).abs() < 1e-8);
        assert!((est.theta_hat[0] + h).abs() < 1e-8);
    }

    #[test]
    fn all_singletons_is_an_error() {
        let edges = (0..5).map(|t| Response { user: t, item: t % 3, value: 1 }).collect();
        let data = ResponseData::new(5, 3, edges).unwrap();
        for method in [Method::Rp, Method::Mrp, Method::Wp, Method::Pmle] {
            assert!(matches!(estimate(&data, &EstimatorConfig::new(method)), Err(Error::NoComparisons)));
        }
    }

    #[test]
    fn mrp_with_one_split_is_rp() {
        let data = two_item_data(40, 13);
        let cfg = EstimatorConfig::new(Method::Mrp).seed(9);
        let mrp = mrp_mle(&data, &cfg).unwrap();
        let rp = rp_mle(&data, &cfg).unwrap();
        assert_eq!(mrp.theta_hat, rp.theta_hat);
    }

    #[test]
    fn mrp_average_is_exact_mean_of_splits() {
        let rows: Vec<Vec<u8>> =
            (0..300).map(|t| (0..5).map(|i| ((t * 31 + i * 17) % 7 < 3) as u8).collect()).collect();
        let data = ResponseData::from_dense(&rows).unwrap();
        let cfg = EstimatorConfig::new(Method::Mrp).seed(2).n_split(6).keep_splits(true);
        let est = mrp_mle(&data, &cfg).unwrap();
        let splits = est.per_split.as_ref().unwrap();
        assert_eq!(splits.len(), 6);
        for i in 0..5 {
            let mut s = 0.0;
            for split in splits {
                s += split[i];
            }
            assert_eq!(est.theta_hat[i], s / 6.0);
        }
        assert!(est.theta_hat.iter().sum::<f64>().abs() <= 1e-10);
    }

    #[test]
    fn pseudo_estimators_coincide_when_degrees_are_two() {
        let data = two_item_data(50, 20);
        let cfg = EstimatorConfig::new(Method::Wp);
        let wp = wp_mle(&data, &cfg).unwrap();
        let pm = pmle(&data, &cfg).unwrap();
        let rp = rp_mle(&data, &cfg).unwrap();
        for i in 0..2 {
            assert!((wp.theta_hat[i] - pm.theta_hat[i]).abs() < 1e-12);
            assert!((wp.theta_hat[i] - rp.theta_hat[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn top_k_examples() {
        assert_eq!(top_k(&[0.3, -0.1, 0.5], 2).unwrap(), vec![2, 0]);
        let mut all = top_k(&[0.3, -0.1, 0.5], 3).unwrap();
        all.sort();
        assert_eq!(all, vec![0, 1, 2]);
        assert_eq!(top_k(&[1.0, 1.0, 1.0], 2).unwrap(), vec![0, 1]);
        assert!(top_k(&[1.0], 0).is_err());
        assert!(top_k(&[1.0], 2).is_err());
    }

    #[test]
    fn recovery_rate_bounds() {
        let theta = [0.9, 0.8, -0.5, -1.2];
        assert_eq!(top_k_recovery_rate(&theta, &[0, 1]), 1.0);
        assert_eq!(top_k_recovery_rate(&theta, &[2, 3]), 0.0);
        assert_eq!(top_k_recovery_rate(&theta, &[0, 3]), 0.5);
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Rp, Method::Mrp, Method::Wp, Method::Pmle] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("spectral".parse::<Method>().is_err());
    }

    #[test]
    fn estimate_json_shape() {
        let est = ItemEstimate {
            method: Method::Mrp,
            theta_hat: vec![0.5, -0.5],
            n_split: Some(3),
            seed: Some(7),
            per_split: None,
            fit: FitReport::default(),
        };
        assert_eq!(est.to_json().unwrap(), r#"{"method":"mrp","theta_hat":[0.5,-0.5],"n_split":3,"seed":7}"#);
        let back = ItemEstimate::from_json(&est.to_json().unwrap()).unwrap();
        assert_eq!(back.theta_hat, est.theta_hat);
    }
}
