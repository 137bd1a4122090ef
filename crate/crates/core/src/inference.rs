//! Plug-in sandwich covariance and two-sided confidence intervals.
//!
//! For MRP-MLE and WP-MLE, `√n(θ̂ − θ*)` is asymptotically normal with
//! covariance `H† V H†`, where `H` is the average per-user Hessian and `V`
//! mixes the within-split (`V_same`) and cross-split (`V_diff`) covariance of
//! per-user gradients. For large `n_split` only `V_diff` matters, and it is
//! estimated from per-user WP gradients at θ̂.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{split_comparisons, ItemEstimate, Method};
use crate::laplacian::WeightedLaplacian;
use crate::logistic::{sigmoid, sigmoid_prime};
use crate::model::{GroundTruth, ResponseData};
use crate::normal::normal_quantile;
use crate::pairing::{enumerate_weighted_pairs, wp_weight, PairScheme};
use crate::solver::BtlObjective;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CovarianceOptions {
    /// Use `(1/n_split)·V_same + ((n_split−1)/n_split)·V_diff` instead of `V_diff` alone.
    pub finite_split_mixture: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PluginCovariance {
    pub n_users: usize,
    /// Ĥ∞: average per-user Hessian at θ̂.
    pub hessian: DMatrix<f64>,
    /// V̂_diff: average outer product of per-user WP gradients at θ̂.
    pub v_diff: DMatrix<f64>,
    /// V̂_same: average outer product of per-user, per-split gradients (MRP-MLE only).
    pub v_same: Option<DMatrix<f64>>,
    /// (1/n)·Ĥ†·V·Ĥ†.
    pub sigma: DMatrix<f64>,
}

/// Accumulates Σ_t g_t g_tᵀ for sparse per-user gradients.
struct OuterSum {
    acc: DMatrix<f64>,
    grad: Vec<f64>,
    touched: Vec<usize>,
}

impl OuterSum {
    fn new(m: usize) -> Self {
        Self { acc: DMatrix::zeros(m, m), grad: vec![0.0; m], touched: Vec::new() }
    }

    fn add(&mut self, i: usize, v: f64) {
        if !self.touched.contains(&i) {
            self.touched.push(i);
        }
        self.grad[i] += v;
    }

    /// Adds the pending user's gradient outer product and resets it.
    fn flush(&mut self) {
        for &a in &self.touched {
            for &b in &self.touched {
                self.acc[(a, b)] += self.grad[a] * self.grad[b];
            }
        }
        for &a in &self.touched {
            self.grad[a] = 0.0;
        }
        self.touched.clear();
    }
}

/// Residual `w·(σ(θ_i − θ_j) − 1{i won})` of one comparison; the gradient gets `+r` at i and `−r` at j.
#[inline]
fn residual(theta: &[f64], i: usize, j: usize, i_won: bool, weight: f64) -> f64 {
    weight * (sigmoid(theta[i] - theta[j]) - f64::from(u8::from(i_won)))
}

/// Σ_t ∇ℒ_WP^{(t)}(θ) ∇ℒ_WP^{(t)}(θ)ᵀ.
fn wp_gradient_outer_sum(data: &ResponseData, theta: &[f64]) -> DMatrix<f64> {
    let mut sum = OuterSum::new(data.n_items());
    for t in 0..data.n_users() {
        let responses = data.user_responses(t);
        let w = wp_weight(responses.len());
        for (a, &(ia, xa)) in responses.iter().enumerate() {
            for &(ib, xb) in &responses[a + 1..] {
                if xa == xb {
                    continue;
                }
                let (i, j, xi) = if ia > ib { (ia, ib, xa) } else { (ib, ia, xb) };
                let r = residual(theta, i, j, xi == 1, w);
                sum.add(i, r);
                sum.add(j, -r);
            }
        }
        sum.flush();
    }
    sum.acc
}

/// Hessian sum and per-user gradient outer sum of split `k` at θ.
fn split_terms(
    data: &ResponseData,
    seed: u64,
    k: usize,
    theta: &[f64],
    with_outer: bool,
) -> (DMatrix<f64>, Option<DMatrix<f64>>) {
    let pc = split_comparisons(data, seed, k);
    let m = data.n_items();
    let mut hess = DMatrix::zeros(m, m);
    for ((i, j), t) in pc.edges() {
        let w = t.count as f64 * sigmoid_prime(theta[i] - theta[j]);
        hess[(i, i)] += w;
        hess[(j, j)] += w;
        hess[(i, j)] -= w;
        hess[(j, i)] -= w;
    }
    let outer = with_outer.then(|| {
        let mut sum = OuterSum::new(m);
        let mut current = None;
        for r in pc.records() {
            if current != Some(r.user) {
                sum.flush();
                current = Some(r.user);
            }
            let res = residual(theta, r.item_i, r.item_j, r.outcome == 0, 1.0);
            sum.add(r.item_i, res);
            sum.add(r.item_j, -res);
        }
        sum.flush();
        sum.acc
    });
    (hess, outer)
}

/// Pseudo-inverse of a Laplacian-structured matrix via `(A + 11ᵀ/m)⁻¹ − 11ᵀ/m`.
fn laplacian_pinv(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = a.nrows();
    let lap = WeightedLaplacian::from_edges(
        m,
        (0..m).flat_map(|i| (0..i).map(move |j| (i, j))).filter_map(|(i, j)| {
            let w = -a[(i, j)];
            (w > 0.0).then_some((i, j, 0.0_f64.max(w)))
        }),
    );
    if !lap.is_connected() {
        return Err(Error::Disconnected { components: lap.components().to_vec() });
    }
    let shift = 1.0 / m as f64;
    let chol = Cholesky::new(a.map(|v| v + shift))
        .ok_or_else(|| Error::InvalidArgument("Hessian is not positive semidefinite".into()))?;
    Ok(chol.inverse().map(|v| v - shift))
}

/// Plug-in Ĥ∞, V̂_diff (and V̂_same on request) and the resulting covariance of θ̂.
///
/// MRP-MLE (and RP-MLE as its one-split case) regenerates its splits from the
/// estimate's seed; WP-MLE uses the weighted all-pairs Hessian.
pub fn plugin_covariance(data: &ResponseData, est: &ItemEstimate, opts: CovarianceOptions) -> Result<PluginCovariance> {
    let m = data.n_items();
    let theta = &est.theta_hat;
    if theta.len() != m {
        return Err(Error::LengthMismatch { expected: m, actual: theta.len() });
    }
    let n = data.n_users() as f64;
    let (hessian, v_same, n_split) = match est.method {
        Method::Rp | Method::Mrp => {
            let (Some(seed), Some(n_split)) = (est.seed, est.n_split) else {
                return Err(Error::InvalidArgument("randomized estimate lacks seed or n_split".into()));
            };
            let parts: Vec<_> = (0..n_split)
                .into_par_iter()
                .map(|k| split_terms(data, seed, k, theta, opts.finite_split_mixture))
                .collect();
            let mut h = DMatrix::zeros(m, m);
            let mut vs = opts.finite_split_mixture.then(|| DMatrix::zeros(m, m));
            for (hk, vk) in parts {
                h += hk;
                if let (Some(vs), Some(vk)) = (vs.as_mut(), vk) {
                    *vs += vk;
                }
            }
            let scale = 1.0 / (n * n_split as f64);
            (h * scale, vs.map(|v| v * scale), n_split)
        }
        Method::Wp => {
            let obj = BtlObjective::from_weighted_pairs(&enumerate_weighted_pairs(data, PairScheme::Weighted));
            let h = obj.hessian(theta)?.into_matrix() / n;
            (h, None, 1)
        }
        Method::Pmle => {
            return Err(Error::InvalidArgument("plug-in covariance is defined for mrp, rp and wp estimates".into()))
        }
    };
    let v_diff = wp_gradient_outer_sum(data, theta) / n;
    let h_pinv = laplacian_pinv(&hessian)?;
    let middle = match &v_same {
        Some(vs) => {
            let ns = n_split as f64;
            vs / ns + &v_diff * ((ns - 1.0) / ns)
        }
        None => v_diff.clone(),
    };
    let sigma = &h_pinv * middle * &h_pinv / n;
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    Ok(PluginCovariance { n_users: data.n_users(), hessian, v_diff, v_same, sigma })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceReport {
    pub method: Method,
    pub theta_hat: Vec<f64>,
    pub variance_diag: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub alpha: f64,
    pub bonferroni: bool,
    /// The normal quantile used for the half-widths.
    pub z: f64,
}

impl InferenceReport {
    /// Number of items whose interval contains `theta_star`.
    pub fn covered(&self, theta_star: &[f64]) -> usize {
        theta_star.iter().enumerate().filter(|&(i, &t)| self.ci_lower[i] <= t && t <= self.ci_upper[i]).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `item,theta_hat,ci_lower,ci_upper` CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["item", "theta_hat", "ci_lower", "ci_upper"])?;
        for i in 0..self.theta_hat.len() {
            w.serialize((i, self.theta_hat[i], self.ci_lower[i], self.ci_upper[i]))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// θ̂_i ± z_{1−α'/2}·√Σ_ii with α' = α/m under Bonferroni, α otherwise.
pub fn confidence_intervals(
    est: &ItemEstimate,
    cov: &PluginCovariance,
    alpha: f64,
    bonferroni: bool,
) -> Result<InferenceReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} is not in (0, 1)")));
    }
    let m = est.theta_hat.len();
    if cov.sigma.nrows() != m {
        return Err(Error::LengthMismatch { expected: m, actual: cov.sigma.nrows() });
    }
    let level = if bonferroni { alpha / m as f64 } else { alpha };
    let z = normal_quantile(1.0 - level / 2.0);
    let variance_diag: Vec<f64> = (0..m).map(|i| cov.sigma[(i, i)]).collect();
    if let Some(i) = variance_diag.iter().position(|&v| v.is_nan() || v <= 0.0) {
        return Err(Error::InvalidData(format!("variance of item {i} is {} (not positive)", variance_diag[i])));
    }
    let half: Vec<f64> = variance_diag.iter().map(|v| z * v.sqrt()).collect();
    Ok(InferenceReport {
        method: est.method,
        theta_hat: est.theta_hat.clone(),
        ci_lower: est.theta_hat.iter().zip(&half).map(|(t, h)| t - h).collect(),
        ci_upper: est.theta_hat.iter().zip(&half).map(|(t, h)| t + h).collect(),
        variance_diag,
        alpha,
        bonferroni,
        z,
    })
}

/// Fraction of (trial, item) intervals that contain the true parameter.
pub fn empirical_coverage(trials: &[(InferenceReport, GroundTruth)]) -> Result<f64> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for (report, gt) in trials {
        if report.theta_hat.len() != gt.n_items() {
            return Err(Error::LengthMismatch { expected: report.theta_hat.len(), actual: gt.n_items() });
        }
        hits += report.covered(gt.theta());
        total += gt.n_items();
    }
    Ok(if total == 0 { 0.0 } else { hits as f64 / total as f64 })
}

/// β = e^ζ/(e^ζ + 1)² for users all sharing parameter ζ.
pub fn beta_for_point_mass(zeta: f64) -> f64 {
    sigmoid_prime(zeta)
}

/// Scalar multiplying `I − 11ᵀ/m` in the closed-form asymptotic covariance of
/// `√n(θ̂_MRP − θ*)` when θ* = 0 and every user answers `m·p` items:
/// `8(m−1)/(β m p) · (1/n_s + ((n_s−1)/n_s) · mp/(2(mp−1)))`.
/// `n_split = None` gives the n_s → ∞ limit, which is also the WP-MLE value.
///
/// This is the closed form as stated. Simulated `n·Var(θ̂)` and the plug-in
/// covariance both come out at one quarter of it: the per-pair disagreement
/// probability at θ* = 0 is `2β`, not `β`, which doubles the Hessian.
pub fn special_case_factor(m: usize, p: f64, beta: f64, n_split: Option<usize>) -> Result<f64> {
    let mp = m as f64 * p;
    let rounded = mp.round();
    if (mp - rounded).abs() > 1e-9 || rounded < 2.0 || !(rounded as u64).is_multiple_of(2) || rounded > m as f64 {
        return Err(Error::InvalidArgument(format!("m*p = {mp} must be an even integer in [2, m]")));
    }
    if !(beta > 0.0 && beta <= 0.25) {
        return Err(Error::InvalidArgument(format!("beta = {beta} is outside (0, 1/4]")));
    }
    let mp = rounded;
    let shrink = mp / (2.0 * (mp - 1.0));
    let mix = match n_split {
        Some(0) => return Err(Error::InvalidArgument("n_split must be at least 1".into())),
        Some(ns) => {
            let ns = ns as f64;
            1.0 / ns + (ns - 1.0) / ns * shrink
        }
        None => shrink,
    };
    Ok(8.0 * (m as f64 - 1.0) / (beta * mp) * mix)
}

/// The closed-form covariance matrix `factor · (I − 11ᵀ/m)`.
pub fn special_case_covariance(m: usize, p: f64, beta: f64, n_split: Option<usize>) -> Result<DMatrix<f64>> {
    let factor = special_case_factor(m, p, beta, n_split)?;
    let inv_m = 1.0 / m as f64;
    Ok(DMatrix::from_fn(m, m, |i, j| factor * (f64::from(u8::from(i == j)) - inv_m)))
}
