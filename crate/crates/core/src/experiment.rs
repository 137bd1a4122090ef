//! Seeded Monte Carlo experiments over grids of simulation settings.
//!
//! An experiment is described by an [`ExperimentConfig`] (usually read from
//! JSON). Every trial draws its own ground truth and responses from
//! `derive_seed(derive_seed(seed_base, point), trial)`, so all methods at a
//! grid point see identical data. Trials run on a rayon pool and results are
//! aggregated in trial order, which makes the output independent of the
//! thread count.

use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate, split_comparisons, top_k, top_k_recovery_rate, EstimatorConfig, Method};
use crate::inference::{confidence_intervals, plugin_covariance, CovarianceOptions};
use crate::laplacian::build_z_laplacian;
use crate::model::{sample_ground_truth, sample_responses, GroundTruth, ParamSpec, ResponseData, SamplingScheme};
use crate::rng::derive_seed;
use crate::solver::{solve_newton, BtlObjective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// ℓ∞ error against the number of users.
    LinfVsN,
    /// ℓ∞ error against the sampling probability.
    LinfVsP,
    /// Error of MRP-MLE against the number of splits.
    Multirun,
    /// ℓ∞ error against the condition number of uniform parameters.
    KappaSweep,
    /// Top-K recovery against the planted gap Δ_K.
    Topk,
    /// Relative deviation of the RP-MLE ℓ2 error from √Trace(L†).
    RefinedL2,
    /// Empirical coverage of plug-in confidence intervals.
    Coverage,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::LinfVsN,
        ExperimentKind::LinfVsP,
        ExperimentKind::Multirun,
        ExperimentKind::KappaSweep,
        ExperimentKind::Topk,
        ExperimentKind::RefinedL2,
        ExperimentKind::Coverage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::LinfVsN => "linf-vs-n",
            ExperimentKind::LinfVsP => "linf-vs-p",
            ExperimentKind::Multirun => "multirun",
            ExperimentKind::KappaSweep => "kappa-sweep",
            ExperimentKind::Topk => "topk",
            ExperimentKind::RefinedL2 => "refined-l2",
            ExperimentKind::Coverage => "coverage",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownName { kind: "experiment", name: s.to_string() })
    }
}

/// How responses are observed in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    Bernoulli,
    /// Every user answers exactly `m·p` items.
    UniformMp,
}

/// Experiment description. Grid fields left out of the JSON take the
/// experiment's desk-scale defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: ExperimentKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n: Vec<usize>,
    /// Empty for `refined-l2` means `m = n/500`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub m: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub methods: Vec<Method>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_split: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub delta_k: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub log_kappa: Vec<f64>,
    /// Miscoverage levels for `coverage`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<Sampling>,
    /// Overrides for the parameter distributions, in `ParamSpec` syntax.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_spec: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta_spec: Option<String>,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Worker threads; `None` uses the global rayon pool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_trials() -> usize {
    100
}

impl ExperimentConfig {
    /// A config with every grid field left to its default.
    pub fn new(name: ExperimentKind) -> Self {
        Self {
            name,
            n: Vec::new(),
            m: Vec::new(),
            p: Vec::new(),
            methods: Vec::new(),
            n_split: Vec::new(),
            delta_k: Vec::new(),
            k: None,
            log_kappa: Vec::new(),
            alpha: Vec::new(),
            sampling: None,
            theta_spec: None,
            zeta_spec: None,
            seed_base: 0,
            trials: default_trials(),
            threads: None,
            output: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The config with all defaults filled in and values validated.
    pub fn resolved(&self) -> Result<ExperimentConfig> {
        use ExperimentKind::*;
        let mut c = self.clone();
        let fill = |v: &mut Vec<usize>, d: &[usize]| {
            if v.is_empty() {
                *v = d.to_vec();
            }
        };
        let fill_f = |v: &mut Vec<f64>, d: &[f64]| {
            if v.is_empty() {
                *v = d.to_vec();
            }
        };
        let (n, m, p): (&[usize], &[usize], &[f64]) = match c.name {
            LinfVsN => (&[2500, 5000, 10000], &[50], &[0.1]),
            LinfVsP => (&[10000], &[50], &[1.0 / 9.0, 0.25, 0.5, 1.0]),
            Multirun => (&[10000], &[50], &[0.2]),
            KappaSweep => (&[20000], &[50], &[0.1]),
            Topk => (&[10000], &[50], &[0.1]),
            RefinedL2 => (&[10000, 20000, 50000], &[], &[0.1]),
            Coverage => (&[10000], &[20], &[0.5]),
        };
        fill(&mut c.n, n);
        fill(&mut c.m, m);
        fill_f(&mut c.p, p);
        let methods: &[Method] = match c.name {
            LinfVsN | LinfVsP | RefinedL2 => &[Method::Rp],
            Multirun => &[Method::Mrp, Method::Wp, Method::Pmle],
            KappaSweep | Topk => &[Method::Rp, Method::Mrp, Method::Pmle],
            Coverage => &[Method::Mrp, Method::Wp],
        };
        if c.methods.is_empty() {
            c.methods = methods.to_vec();
        }
        let n_split: &[usize] = match c.name {
            Multirun => &[1, 2, 5, 10, 20, 50, 100],
            Coverage => &[10, 50, 100],
            _ => &[20],
        };
        fill(&mut c.n_split, n_split);
        if c.name == Topk {
            fill_f(&mut c.delta_k, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]);
            c.k.get_or_insert(5);
        }
        if c.name == KappaSweep {
            fill_f(&mut c.log_kappa, &[0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        }
        if c.name == Coverage {
            fill_f(&mut c.alpha, &[0.2, 0.1, 0.05, 0.01]);
        }
        c.sampling.get_or_insert(if c.name == Multirun { Sampling::UniformMp } else { Sampling::Bernoulli });
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        if self.n.contains(&0) || self.m.contains(&0) || self.n_split.contains(&0) {
            return bad("n, m and n_split must be positive".into());
        }
        if let Some(p) = self.p.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return bad(format!("p = {p} is not in (0, 1]"));
        }
        if let Some(a) = self.alpha.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return bad(format!("alpha = {a} is not in (0, 1)"));
        }
        if let Some(d) = self.delta_k.iter().find(|d| !d.is_finite()) {
            return bad(format!("delta_k = {d} is not finite"));
        }
        if let Some(l) = self.log_kappa.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return bad(format!("log_kappa = {l} must be finite and nonnegative"));
        }
        if self.name == ExperimentKind::Topk {
            let k = self.k.unwrap_or(0);
            if let Some(m) = self.m.iter().find(|&&m| k == 0 || k >= m) {
                return bad(format!("K = {k} must be in 1..{m}"));
            }
        }
        if self.name == ExperimentKind::Coverage {
            if let Some(m) = self.methods.iter().find(|m| !matches!(m, Method::Mrp | Method::Rp | Method::Wp)) {
                return bad(format!("coverage needs mrp, rp or wp, not {m}"));
            }
        }
        for spec in [&self.theta_spec, &self.zeta_spec].into_iter().flatten() {
            spec.parse::<ParamSpec>()?;
        }
        Ok(())
    }
}

/// One aggregated line of an experiment table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub n: usize,
    pub m: usize,
    pub p: f64,
    pub method: Option<Method>,
    pub n_split: Option<usize>,
    pub delta_k: Option<f64>,
    pub log_kappa: Option<f64>,
    pub alpha: Option<f64>,
    /// Trials that contributed to `mean`.
    pub trials: usize,
    pub statistic: String,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
}

impl ExperimentResult {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Rows for `statistic`, in table order.
    pub fn rows_for<'a>(&'a self, statistic: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.statistic == statistic)
    }
}

/// Least-squares line `y ≈ intercept + slope·x` with its coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), actual: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("a linear fit needs at least two points".into()));
    }
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("x values are all equal".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { slope, intercept: my - slope * mx, r2 })
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Point {
    n: usize,
    m: usize,
    p: f64,
    delta_k: Option<f64>,
    log_kappa: Option<f64>,
}

/// An estimator with its split count (for mrp).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Variant {
    method: Method,
    n_split: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key {
    variant: Variant,
    alpha: Option<f64>,
    statistic: &'static str,
}

/// Observations of one trial, or the error that made a variant fail.
type TrialOutput = Vec<(Variant, Result<Vec<(Option<f64>, &'static str, f64)>>)>;

fn points(c: &ExperimentConfig) -> Vec<Point> {
    let mut out = Vec::new();
    let dk: Vec<Option<f64>> =
        if c.delta_k.is_empty() { vec![None] } else { c.delta_k.iter().copied().map(Some).collect() };
    let lk: Vec<Option<f64>> =
        if c.log_kappa.is_empty() { vec![None] } else { c.log_kappa.iter().copied().map(Some).collect() };
    for &n in &c.n {
        let ms = if c.m.is_empty() { vec![(n / 500).max(2)] } else { c.m.clone() };
        for &m in &ms {
            for &p in &c.p {
                for &delta_k in &dk {
                    for &log_kappa in &lk {
                        out.push(Point { n, m, p, delta_k, log_kappa });
                    }
                }
            }
        }
    }
    out
}

fn variants(c: &ExperimentConfig) -> Vec<Variant> {
    let mut out = Vec::new();
    for &method in &c.methods {
        match method {
            Method::Mrp => out.extend(c.n_split.iter().map(|&ns| Variant { method, n_split: Some(ns) })),
            Method::Rp => out.push(Variant { method, n_split: Some(1) }),
            Method::Wp | Method::Pmle => out.push(Variant { method, n_split: None }),
        }
    }
    out
}

fn trial_data(c: &ExperimentConfig, pt: &Point, seed: u64) -> Result<(GroundTruth, ResponseData)> {
    let parse = |s: &Option<String>| s.as_deref().map(str::parse::<ParamSpec>).transpose();
    let (theta_override, zeta_override) = (parse(&c.theta_spec)?, parse(&c.zeta_spec)?);
    let default_spec = if c.name == ExperimentKind::Multirun { ParamSpec::Zeros } else { ParamSpec::StandardNormal };
    let (theta_spec, zeta_spec) = match (pt.log_kappa, pt.delta_k) {
        (Some(log_kappa), _) => (ParamSpec::Uniform { log_kappa }, ParamSpec::Uniform { log_kappa }),
        (None, Some(delta)) => (
            ParamSpec::planted_top_k(pt.m, c.k.unwrap_or(5), delta),
            zeta_override.unwrap_or(ParamSpec::StandardNormal),
        ),
        (None, None) => (theta_override.unwrap_or_else(|| default_spec.clone()), zeta_override.unwrap_or(default_spec)),
    };
    let gt = sample_ground_truth(pt.n, pt.m, &theta_spec, &zeta_spec, seed)?;
    let scheme = match c.sampling.unwrap_or(Sampling::Bernoulli) {
        Sampling::Bernoulli => SamplingScheme::Bernoulli { p: pt.p },
        Sampling::UniformMp => SamplingScheme::uniform_from_p(pt.m, pt.p)?,
    };
    let data = sample_responses(&gt, scheme, seed)?;
    Ok((gt, data))
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

fn l2sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn estimator(v: Variant, seed: u64) -> EstimatorConfig {
    EstimatorConfig::new(v.method).seed(seed).n_split(v.n_split.unwrap_or(1))
}

fn run_trial(c: &ExperimentConfig, pt: &Point, vars: &[Variant], seed: u64) -> Result<TrialOutput> {
    let (gt, data) = trial_data(c, pt, seed)?;
    let truth = gt.theta();
    let mut out: TrialOutput = Vec::new();
    match c.name {
        ExperimentKind::LinfVsN | ExperimentKind::LinfVsP | ExperimentKind::KappaSweep => {
            for &v in vars {
                let r = estimate(&data, &estimator(v, seed)).map(|e| {
                    vec![(None, "linf", linf(&e.theta_hat, truth)), (None, "l2sq", l2sq(&e.theta_hat, truth))]
                });
                out.push((v, r));
            }
        }
        ExperimentKind::Topk => {
            let k = c.k.unwrap_or(5);
            let true_top = top_k(truth, k)?;
            for &v in vars {
                let r = estimate(&data, &estimator(v, seed))
                    .map(|e| vec![(None, "topk_recovery", top_k_recovery_rate(&e.theta_hat, &true_top))]);
                out.push((v, r));
            }
        }
        ExperimentKind::Multirun => {
            let max_split = c.n_split.iter().copied().max().unwrap_or(1);
            let mut done_mrp = false;
            for &v in vars {
                if v.method != Method::Mrp {
                    let r = estimate(&data, &estimator(v, seed)).map(|e| {
                        vec![(None, "l2sq", l2sq(&e.theta_hat, truth)), (None, "linf", linf(&e.theta_hat, truth))]
                    });
                    out.push((v, r));
                    continue;
                }
                if done_mrp {
                    continue;
                }
                done_mrp = true;
                // One pass over max_split splits; prefix means give every smaller split count.
                let cfg = EstimatorConfig::new(Method::Mrp).seed(seed).n_split(max_split).keep_splits(true);
                match estimate(&data, &cfg) {
                    Ok(e) => {
                        let splits = e.per_split.unwrap_or_default();
                        for &ns in &c.n_split {
                            let mean: Vec<f64> =
                                (0..pt.m).map(|i| splits[..ns].iter().map(|s| s[i]).sum::<f64>() / ns as f64).collect();
                            let v = Variant { method: Method::Mrp, n_split: Some(ns) };
                            out.push((
                                v,
                                Ok(vec![(None, "l2sq", l2sq(&mean, truth)), (None, "linf", linf(&mean, truth))]),
                            ));
                        }
                    }
                    Err(e) if !e.is_usage() => {
                        for &ns in &c.n_split {
                            let v = Variant { method: Method::Mrp, n_split: Some(ns) };
                            out.push((v, Err(Error::InvalidData(e.to_string()))));
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        ExperimentKind::RefinedL2 => {
            let v = Variant { method: Method::Rp, n_split: Some(1) };
            let r = (|| {
                let pc = split_comparisons(&data, seed, 0);
                let fit = solve_newton(&BtlObjective::from_comparisons(&pc), &Default::default())?;
                let err = l2sq(&fit.theta_hat, truth).sqrt();
                let tr_z = build_z_laplacian(&pc, truth)?.pinv_trace()?.sqrt();
                let tr_zhat = build_z_laplacian(&pc, &fit.theta_hat)?.pinv_trace()?.sqrt();
                Ok(vec![
                    (None, "rel_dev_z", (err - tr_z).abs() / tr_z),
                    (None, "rel_dev_zhat", (err - tr_zhat).abs() / tr_zhat),
                    (None, "l2", err),
                    (None, "sqrt_trace_z", tr_z),
                ])
            })();
            out.push((v, r));
        }
        ExperimentKind::Coverage => {
            for &v in vars {
                let r = (|| {
                    let e = estimate(&data, &estimator(v, seed))?;
                    let cov = plugin_covariance(&data, &e, CovarianceOptions::default())?;
                    let mut obs = Vec::with_capacity(c.alpha.len());
                    for &alpha in &c.alpha {
                        let report = confidence_intervals(&e, &cov, alpha, false)?;
                        obs.push((Some(alpha), "coverage", report.covered(truth) as f64 / pt.m as f64));
                    }
                    Ok(obs)
                })();
                out.push((v, r));
            }
        }
    }
    Ok(out)
}

fn aggregate(c: &ExperimentConfig, pt: &Point, outputs: Vec<TrialOutput>) -> Result<Vec<ResultRow>> {
    let mut keys: Vec<Key> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut failures: Vec<(Variant, usize)> = Vec::new();
    for trial in outputs {
        for (variant, r) in trial {
            match r {
                Ok(obs) => {
                    for (alpha, statistic, value) in obs {
                        let key = Key { variant, alpha, statistic };
                        match keys.iter().position(|k| *k == key) {
                            Some(i) => values[i].push(value),
                            None => {
                                keys.push(key);
                                values.push(vec![value]);
                            }
                        }
                    }
                }
                Err(e) if e.is_usage() => return Err(e),
                Err(_) => match failures.iter_mut().find(|(v, _)| *v == variant) {
                    Some((_, count)) => *count += 1,
                    None => failures.push((variant, 1)),
                },
            }
        }
    }
    let row = |variant: Variant, alpha, trials, statistic: &str, mean, stderr| ResultRow {
        experiment: c.name.as_str().to_string(),
        n: pt.n,
        m: pt.m,
        p: pt.p,
        method: Some(variant.method),
        n_split: variant.n_split,
        delta_k: pt.delta_k,
        log_kappa: pt.log_kappa,
        alpha,
        trials,
        statistic: statistic.to_string(),
        mean,
        stderr,
    };
    let mut rows: Vec<ResultRow> = keys
        .iter()
        .zip(&values)
        .map(|(k, v)| {
            let (mean, stderr) = mean_stderr(v);
            row(k.variant, k.alpha, v.len(), k.statistic, mean, stderr)
        })
        .collect();
    for (variant, count) in failures {
        rows.push(row(variant, None, c.trials, "failure_rate", count as f64 / c.trials as f64, 0.0));
    }
    if c.name == ExperimentKind::Multirun && c.n_split.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.method == Some(Method::Mrp) && r.statistic == "l2sq")
            .map(|r| (1.0 / r.n_split.unwrap_or(1) as f64, r.mean))
            .unzip();
        if x.len() >= 2 {
            let fit = linear_fit(&x, &y)?;
            let v = Variant { method: Method::Mrp, n_split: None };
            rows.push(row(v, None, c.trials, "l2sq_vs_inv_nsplit_r2", fit.r2, 0.0));
            rows.push(row(v, None, c.trials, "l2sq_vs_inv_nsplit_slope", fit.slope, 0.0));
        }
    }
    Ok(rows)
}

fn run_resolved(c: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let vars = variants(c);
    let mut rows = Vec::new();
    for (pi, pt) in points(c).iter().enumerate() {
        let point_seed = derive_seed(c.seed_base, pi as u64);
        let outputs: Vec<Result<TrialOutput>> =
            (0..c.trials).into_par_iter().map(|r| run_trial(c, pt, &vars, derive_seed(point_seed, r as u64))).collect();
        let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;
        rows.extend(aggregate(c, pt, outputs)?);
    }
    Ok(rows)
}

/// Runs the experiment, on a dedicated pool when `threads` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let c = config.resolved()?;
    let rows = match c.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(|| run_resolved(&c))?,
        None => run_resolved(&c)?,
    };
    Ok(ExperimentResult { config: c, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_exact_line() {
        let fit = linear_fit(&[1.0, 2.0, 3.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14);
        assert!((fit.intercept + 1.0).abs() < 1e-14);
        assert!((fit.r2 - 1.0).abs() < 1e-14);
        assert!(linear_fit(&[1.0], &[1.0]).is_err());
        assert!(linear_fit(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mean_stderr_values() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn config_parsing_and_defaults() {
        let c = ExperimentConfig::from_json(r#"{"name": "topk", "n": [300], "trials": 3}"#).unwrap();
        let r = c.resolved().unwrap();
        assert_eq!(r.k, Some(5));
        assert_eq!(r.delta_k.len(), 7);
        assert_eq!(r.m, vec![50]);
        assert!(ExperimentConfig::from_json(r#"{"name": "nope"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"name": "topk", "bogus": 1}"#).is_err());
        let zero = ExperimentConfig::from_json(r#"{"name": "coverage", "trials": 0}"#).unwrap();
        assert!(zero.resolved().is_err());
        let bad = ExperimentConfig::from_json(r#"{"name": "coverage", "methods": ["pmle"]}"#).unwrap();
        assert!(bad.resolved().is_err());
        assert_eq!("refined-l2".parse::<ExperimentKind>().unwrap(), ExperimentKind::RefinedL2);
        assert!("refined".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn small_run_is_deterministic_across_thread_counts() {
        let mut c = ExperimentConfig::new(ExperimentKind::LinfVsN);
        c.n = vec![400];
        c.m = vec![8];
        c.p = vec![0.5];
        c.methods = vec![Method::Rp, Method::Wp];
        c.trials = 6;
        c.seed_base = 11;
        c.threads = Some(1);
        let a = run_experiment(&c).unwrap();
        c.threads = Some(3);
        let b = run_experiment(&c).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.rows.len(), 4);
        assert!(a.rows.iter().all(|r| r.trials == 6 && r.mean > 0.0));
    }

    #[test]
    fn multirun_rows_cover_every_split_count() {
        let mut c = ExperimentConfig::new(ExperimentKind::Multirun);
        c.n = vec![300];
        c.m = vec![6];
        c.p = vec![2.0 / 3.0];
        c.n_split = vec![1, 2, 4];
        c.methods = vec![Method::Mrp];
        c.trials = 4;
        let res = run_experiment(&c).unwrap();
        let splits: Vec<_> = res.rows_for("l2sq").map(|r| r.n_split).collect();
        assert_eq!(splits, vec![Some(1), Some(2), Some(4)]);
        assert_eq!(res.rows_for("l2sq_vs_inv_nsplit_r2").count(), 1);
        let mut csv = Vec::new();
        res.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(
            text.starts_with("experiment,n,m,p,method,n_split,delta_k,log_kappa,alpha,trials,statistic,mean,stderr\n")
        );
    }
}
