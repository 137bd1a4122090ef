//! Ground-truth parameters, Rasch sampling of sparse responses, and the
//! response container shared by every estimator.
//!
//! A user `t` responds to item `i` with `X_ti = 1` ("the item wins", e.g. the
//! problem was answered incorrectly) with probability
//! `e^{θ_i} / (e^{ζ_t} + e^{θ_i}) = σ(θ_i − ζ_t)`.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logistic::sigmoid;
use crate::rng::{stream_rng, Stream};

/// Item parameters `theta` (zero mean) and user parameters `zeta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    theta: Vec<f64>,
    zeta: Vec<f64>,
}

impl GroundTruth {
    /// Builds a ground truth, shifting `theta` to zero mean and `zeta` by the
    /// same amount so every θ_i − ζ_t, and hence the response law, is unchanged.
    pub fn new(theta: Vec<f64>, zeta: Vec<f64>) -> Result<Self> {
        if theta.iter().chain(&zeta).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("parameters must be finite".into()));
        }
        let shift = mean(&theta);
        if shift == 0.0 {
            return Ok(Self { theta, zeta });
        }
        Ok(Self {
            theta: theta.into_iter().map(|v| v - shift).collect(),
            zeta: zeta.into_iter().map(|v| v - shift).collect(),
        })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn n_users(&self) -> usize {
        self.zeta.len()
    }

    pub fn n_items(&self) -> usize {
        self.theta.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            theta: Vec<f64>,
            zeta: Vec<f64>,
        }
        let raw: Raw = serde_json::from_str(s)?;
        Self::new(raw.theta, raw.zeta)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub(crate) fn centered(mut v: Vec<f64>) -> Vec<f64> {
    let m = mean(&v);
    v.iter_mut().for_each(|x| *x -= m);
    v
}

/// How a parameter vector is generated.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamSpec {
    /// i.i.d. N(0, 1), then shifted to zero mean.
    StandardNormal,
    /// i.i.d. Unif(0, log κ), then shifted to zero mean.
    Uniform {
        log_kappa: f64,
    },
    Zeros,
    /// Used verbatim, up to the joint shift applied by [`GroundTruth::new`].
    Explicit(Vec<f64>),
}

impl ParamSpec {
    /// Item parameters of the planted top-K instance: `(1 − K/m)·Δ` for the
    /// first `k` items and `−(K/m)·Δ` for the rest.
    pub fn planted_top_k(m: usize, k: usize, delta: f64) -> Self {
        let frac = k as f64 / m as f64;
        ParamSpec::Explicit((0..m).map(|i| if i < k { (1.0 - frac) * delta } else { -frac * delta }).collect())
    }

    fn draw<R: Rng>(&self, len: usize, rng: &mut R) -> Result<Vec<f64>> {
        Ok(match self {
            ParamSpec::StandardNormal => centered((0..len).map(|_| StandardNormal.sample(rng)).collect()),
            ParamSpec::Uniform { log_kappa } => {
                if !(log_kappa.is_finite() && *log_kappa >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "log kappa must be finite and nonnegative, got {log_kappa}"
                    )));
                }
                if *log_kappa == 0.0 {
                    vec![0.0; len]
                } else {
                    let dist = Uniform::new(0.0, *log_kappa).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                    centered((0..len).map(|_| dist.sample(rng)).collect())
                }
            }
            ParamSpec::Zeros => vec![0.0; len],
            ParamSpec::Explicit(v) => {
                if v.len() != len {
                    return Err(Error::LengthMismatch { expected: len, actual: v.len() });
                }
                v.clone()
            }
        })
    }
}

impl FromStr for ParamSpec {
    type Err = Error;

    /// Accepts `normal`, `zeros`, `uniform:<log kappa>` and `explicit:<v1>,<v2>,...`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h, Some(t)),
            None => (s, None),
        };
        let bad_number = |t: &str| Error::InvalidArgument(format!("bad number `{t}` in `{s}`"));
        match (head, tail) {
            ("normal" | "standard-normal", None) => Ok(ParamSpec::StandardNormal),
            ("zeros" | "all-zeros", None) => Ok(ParamSpec::Zeros),
            ("uniform", Some(t)) => Ok(ParamSpec::Uniform { log_kappa: t.trim().parse().map_err(|_| bad_number(t))? }),
            ("explicit", Some(t)) => t
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| bad_number(v)))
                .collect::<Result<Vec<_>>>()
                .map(ParamSpec::Explicit),
            _ => Err(Error::UnknownName { kind: "parameter spec", name: s.to_string() }),
        }
    }
}

/// Draws item and user parameters. `theta` is drawn before `zeta` from one stream.
pub fn sample_ground_truth(
    n: usize,
    m: usize,
    theta_spec: &ParamSpec,
    zeta_spec: &ParamSpec,
    seed: u64,
) -> Result<GroundTruth> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("n and m must be at least 1".into()));
    }
    let mut rng = stream_rng(seed, Stream::GroundTruth);
    let theta = theta_spec.draw(m, &mut rng)?;
    let zeta = zeta_spec.draw(n, &mut rng)?;
    GroundTruth::new(theta, zeta)
}

/// P[X_ti = 1] = e^{θ_i}/(e^{ζ_t}+e^{θ_i}).
#[inline]
pub fn rasch_response_prob(theta_i: f64, zeta_t: f64) -> f64 {
    sigmoid(theta_i - zeta_t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Response {
    pub user: usize,
    pub item: usize,
    pub value: u8,
}

/// Sparse binary user-item responses.
///
/// Responses keep their insertion order; per-user views list a user's items in
/// that order, which is the order random pairing shuffles from.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseData {
    n_users: usize,
    n_items: usize,
    edges: Vec<Response>,
    offsets: Vec<usize>,
    by_user: Vec<(usize, u8)>,
}

impl ResponseData {
    pub fn new(n_users: usize, n_items: usize, edges: Vec<Response>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        let mut degree = vec![0usize; n_users];
        for e in &edges {
            if e.user >= n_users || e.item >= n_items {
                return Err(Error::InvalidData(format!(
                    "response ({}, {}) out of range for {n_users} users x {n_items} items",
                    e.user, e.item
                )));
            }
            if e.value > 1 {
                return Err(Error::InvalidData(format!("response value {} is not 0 or 1", e.value)));
            }
            if !seen.insert((e.user, e.item)) {
                return Err(Error::InvalidData(format!("duplicate response for user {} item {}", e.user, e.item)));
            }
            degree[e.user] += 1;
        }
        let mut offsets = Vec::with_capacity(n_users + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..n_users].to_vec();
        let mut by_user = vec![(0usize, 0u8); edges.len()];
        for e in &edges {
            by_user[cursor[e.user]] = (e.item, e.value);
            cursor[e.user] += 1;
        }
        Ok(Self { n_users, n_items, edges, offsets, by_user })
    }

    /// Builds from a dense 0/1 matrix (rows are users), all entries observed.
    pub fn from_dense(rows: &[Vec<u8>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        let mut edges = Vec::with_capacity(rows.len() * m);
        for (user, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidData("ragged response matrix".into()));
            }
            edges.extend(row.iter().enumerate().map(|(item, &value)| Response { user, item, value }));
        }
        Self::new(rows.len(), m, edges)
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn edges(&self) -> &[Response] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// `(item, response)` pairs of user `t`, in insertion order.
    pub fn user_responses(&self, t: usize) -> &[(usize, u8)] {
        &self.by_user[self.offsets[t]..self.offsets[t + 1]]
    }

    /// m_t, the number of responses of user `t`.
    pub fn user_degree(&self, t: usize) -> usize {
        self.offsets[t + 1] - self.offsets[t]
    }

    /// n_i, the number of users who responded to each item.
    pub fn item_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_items];
        for e in &self.edges {
            deg[e.item] += 1;
        }
        deg
    }

    /// Response of user `t` to item `i`, if observed.
    pub fn response(&self, t: usize, i: usize) -> Option<u8> {
        self.user_responses(t).iter().find(|(item, _)| *item == i).map(|&(_, v)| v)
    }

    /// Writes `user_id,item_id,response` CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["user_id", "item_id", "response"])?;
        for e in &self.edges {
            w.serialize((e.user, e.item, e.value))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `user_id,item_id,response` CSV. Dimensions default to `max id + 1`.
    pub fn read_csv<R: Read>(reader: R, dims: Option<(usize, usize)>) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = r.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["user_id", "item_id", "response"] {
            return Err(Error::Parse { line: 1, message: "expected header `user_id,item_id,response`".into() });
        }
        let mut edges = Vec::new();
        for record in r.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let parse_err = |message: String| Error::Parse { line, message };
            if record.len() != 3 {
                return Err(parse_err(format!("expected 3 fields, found {}", record.len())));
            }
            let field = |k: usize, name: &str| -> Result<usize> {
                record[k].parse::<usize>().map_err(|_| parse_err(format!("bad {name} `{}`", &record[k])))
            };
            let user = field(0, "user_id")?;
            let item = field(1, "item_id")?;
            let value = match &record[2] {
                "0" => 0,
                "1" => 1,
                other => return Err(parse_err(format!("response `{other}` is not 0 or 1"))),
            };
            edges.push(Response { user, item, value });
        }
        let (n, m) = dims.unwrap_or_else(|| {
            let n = edges.iter().map(|e| e.user + 1).max().unwrap_or(0);
            let m = edges.iter().map(|e| e.item + 1).max().unwrap_or(0);
            (n, m)
        });
        Self::new(n, m, edges)
    }
}

/// Which user-item pairs get observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingScheme {
    /// Each (t, i) observed independently with probability `p`.
    Bernoulli { p: f64 },
    /// Each user responds to exactly `per_user` items chosen uniformly at random.
    UniformCount { per_user: usize },
}

impl SamplingScheme {
    /// The uniform scheme with `m·p` items per user; `m·p` must be a positive integer ≤ m.
    pub fn uniform_from_p(m: usize, p: f64) -> Result<Self> {
        let mp = m as f64 * p;
        let rounded = mp.round();
        if (mp - rounded).abs() > 1e-9 || rounded < 1.0 || rounded > m as f64 {
            return Err(Error::InvalidArgument(format!(
                "uniform sampling needs m*p to be an integer in [1, m], got {mp}"
            )));
        }
        Ok(SamplingScheme::UniformCount { per_user: rounded as usize })
    }
}

/// Samples the observed edge set and a Rasch response on each observed edge.
///
/// Edges are emitted user-major, items ascending. Edge selection and
/// responses use separate streams of `seed`.
pub fn sample_responses(gt: &GroundTruth, scheme: SamplingScheme, seed: u64) -> Result<ResponseData> {
    let (n, m) = (gt.n_users(), gt.n_items());
    let mut edge_rng = stream_rng(seed, Stream::EdgeSampling);
    let mut response_rng = stream_rng(seed, Stream::Responses);
    let mut edges = Vec::new();
    let mut push = |user: usize, item: usize, rng: &mut crate::rng::StreamRng| {
        let prob = rasch_response_prob(gt.theta[item], gt.zeta[user]);
        let value = u8::from(rng.random::<f64>() < prob);
        edges.push(Response { user, item, value });
    };
    match scheme {
        SamplingScheme::Bernoulli { p } => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("p = {p} is not a probability")));
            }
            for t in 0..n {
                for i in 0..m {
                    if edge_rng.random::<f64>() < p {
                        push(t, i, &mut response_rng);
                    }
                }
            }
        }
        SamplingScheme::UniformCount { per_user } => {
            if per_user == 0 || per_user > m {
                return Err(Error::InvalidArgument(format!(
                    "uniform sampling needs 1 <= items per user <= {m}, got {per_user}"
                )));
            }
            for t in 0..n {
                let mut items = index::sample(&mut edge_rng, m, per_user).into_vec();
                items.sort_unstable();
                for i in items {
                    push(t, i, &mut response_rng);
                }
            }
        }
    }
    ResponseData::new(n, m, edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionNumbers {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa: f64,
}

/// κ₁ = exp(max |θ_i − θ_j|), κ₂ = exp(max |ζ_t − θ_i|), κ = max(κ₁, κ₂).
pub fn condition_numbers(gt: &GroundTruth) -> ConditionNumbers {
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (tlo, thi) = range(&gt.theta);
    let (zlo, zhi) = range(&gt.zeta);
    let log_k1 = if gt.theta.is_empty() { 0.0 } else { thi - tlo };
    let log_k2 = if gt.theta.is_empty() || gt.zeta.is_empty() { 0.0 } else { (zhi - tlo).abs().max((thi - zlo).abs()) };
    let (kappa1, kappa2) = (log_k1.exp(), log_k2.exp());
    ConditionNumbers { kappa1, kappa2, kappa: kappa1.max(kappa2) }
}
