//! Compiling user-item responses into item-item comparisons.
//!
//! Random pairing matches each user's responded items into disjoint pairs, so
//! the resulting comparisons are mutually independent and follow a
//! Bradley-Terry-Luce model in the item parameters alone. All-pairs
//! enumeration (with or without per-user weights) feeds the pseudo-likelihood
//! baselines.

use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::logistic::sigmoid;
use crate::model::ResponseData;

/// One matched pair of a user's items, stored with `item_i > item_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairedTuple {
    pub user: usize,
    pub item_i: usize,
    pub item_j: usize,
}

/// The pairs chosen by one random split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub pairs: Vec<PairedTuple>,
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a > b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Randomly matches each user's items into ⌊m_t/2⌋ disjoint pairs.
///
/// The user's items are shuffled (starting from insertion order) and taken in
/// consecutive pairs; for odd m_t the last shuffled item is left out. This is
/// a uniform perfect matching on a uniformly random subset of m̃_t items.
pub fn random_split<R: Rng + ?Sized>(data: &ResponseData, rng: &mut R) -> SplitAssignment {
    let mut pairs = Vec::with_capacity(data.len() / 2);
    let mut buf = Vec::new();
    for t in 0..data.n_users() {
        let responses = data.user_responses(t);
        if responses.len() < 2 {
            continue;
        }
        buf.clear();
        buf.extend(responses.iter().map(|&(item, _)| item));
        buf.shuffle(rng);
        for chunk in buf.chunks_exact(2) {
            let (item_i, item_j) = ordered(chunk[0], chunk[1]);
            pairs.push(PairedTuple { user: t, item_i, item_j });
        }
    }
    SplitAssignment { pairs }
}

/// One effective comparison: `outcome` is Y_ij^t = 1{X_ti < X_tj}, i.e. 1 when item j won.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComparisonRecord {
    pub item_i: usize,
    pub item_j: usize,
    pub user: usize,
    pub outcome: u8,
}

/// Aggregate of the comparisons on one unordered edge `(i, j)`, `i > j`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeTally {
    /// L_ij.
    pub count: u32,
    /// Comparisons won by the larger-index item `i`, i.e. L_ij·Y_ji.
    pub wins_i: u32,
}

/// Dense triangular table for small `m`, ordered map otherwise.
#[derive(Debug, Clone, PartialEq)]
enum PairTable {
    Dense(Vec<EdgeTally>),
    Sparse(BTreeMap<(usize, usize), EdgeTally>),
}

const DENSE_LIMIT: usize = 64;

fn tri_index(i: usize, j: usize) -> usize {
    i * (i - 1) / 2 + j
}

impl PairTable {
    fn new(m: usize) -> Self {
        if m <= DENSE_LIMIT {
            PairTable::Dense(vec![EdgeTally::default(); m * m.saturating_sub(1) / 2])
        } else {
            PairTable::Sparse(BTreeMap::new())
        }
    }

    fn entry(&mut self, i: usize, j: usize) -> &mut EdgeTally {
        match self {
            PairTable::Dense(v) => &mut v[tri_index(i, j)],
            PairTable::Sparse(map) => map.entry((i, j)).or_default(),
        }
    }

    fn get(&self, i: usize, j: usize) -> Option<EdgeTally> {
        match self {
            PairTable::Dense(v) => v.get(tri_index(i, j)).copied().filter(|t| t.count > 0),
            PairTable::Sparse(map) => map.get(&(i, j)).copied(),
        }
    }

    /// Observed edges ordered by `(i, j)`.
    fn edges(&self, m: usize) -> Vec<((usize, usize), EdgeTally)> {
        match self {
            PairTable::Dense(v) => (1..m)
                .flat_map(|i| (0..i).map(move |j| (i, j)))
                .filter_map(|(i, j)| {
                    let t = v[tri_index(i, j)];
                    (t.count > 0).then_some(((i, j), t))
                })
                .collect(),
            PairTable::Sparse(map) => map.iter().map(|(&k, &t)| (k, t)).collect(),
        }
    }
}

/// Item-item comparisons produced by one random split.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedComparisons {
    m: usize,
    records: Vec<ComparisonRecord>,
    table: PairTable,
}

impl PairedComparisons {
    fn from_records(m: usize, records: Vec<ComparisonRecord>) -> Self {
        let mut table = PairTable::new(m);
        for r in &records {
            let tally = table.entry(r.item_i, r.item_j);
            tally.count += 1;
            tally.wins_i += u32::from(r.outcome == 0);
        }
        Self { m, records, table }
    }

    pub fn n_items(&self) -> usize {
        self.m
    }

    pub fn records(&self) -> &[ComparisonRecord] {
        &self.records
    }

    /// L_total, the number of effective comparisons.
    pub fn total(&self) -> usize {
        self.records.len()
    }

    /// The edge set ℰ_Y with its tallies, ordered by `(i, j)` with `i > j`.
    pub fn edges(&self) -> Vec<((usize, usize), EdgeTally)> {
        self.table.edges(self.m)
    }

    /// L_ij (symmetric).
    pub fn count(&self, i: usize, j: usize) -> u32 {
        if i == j {
            return 0;
        }
        let (a, b) = ordered(i, j);
        self.table.get(a, b).map_or(0, |t| t.count)
    }

    /// Y_ij, the fraction of comparisons on (i, j) won by item `j`; `None` off ℰ_Y.
    pub fn mean_outcome(&self, i: usize, j: usize) -> Option<f64> {
        if i == j {
            return None;
        }
        let (a, b) = ordered(i, j);
        let t = self.table.get(a, b)?;
        let wins_a = t.wins_i as f64 / t.count as f64;
        // wins_a is the fraction won by the larger index `a`.
        Some(if j == a { wins_a } else { 1.0 - wins_a })
    }

    /// d_i = Σ_j L_ij.
    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.m];
        for ((i, j), t) in self.edges() {
            d[i] += t.count as f64;
            d[j] += t.count as f64;
        }
        d
    }

    /// Aggregated `item_i,item_j,wins_ij,losses_ij` CSV, where `wins_ij`
    /// counts comparisons won by `item_i`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["item_i", "item_j", "wins_ij", "losses_ij"])?;
        for ((i, j), t) in self.edges() {
            w.serialize((i, j, t.wins_i, t.count - t.wins_i))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Keeps the paired tuples whose two responses disagree (ties carry no information).
pub fn compile_comparisons(data: &ResponseData, split: &SplitAssignment) -> Result<PairedComparisons> {
    let mut records = Vec::with_capacity(split.pairs.len());
    for pair in &split.pairs {
        let lookup = |item: usize| {
            if pair.user >= data.n_users() {
                return None;
            }
            data.response(pair.user, item)
        };
        let (Some(xi), Some(xj)) = (lookup(pair.item_i), lookup(pair.item_j)) else {
            return Err(Error::InvalidArgument(format!(
                "split pairs items ({}, {}) for user {} but a response is missing",
                pair.item_i, pair.item_j, pair.user
            )));
        };
        if pair.item_i <= pair.item_j {
            return Err(Error::InvalidArgument(format!(
                "split pair ({}, {}) is not ordered with item_i > item_j",
                pair.item_i, pair.item_j
            )));
        }
        if xi != xj {
            records.push(ComparisonRecord {
                item_i: pair.item_i,
                item_j: pair.item_j,
                user: pair.user,
                outcome: u8::from(xi < xj),
            });
        }
    }
    Ok(PairedComparisons::from_records(data.n_items(), records))
}

/// Split and compile in one pass, without the intermediate assignment or lookups.
pub fn random_comparisons<R: Rng + ?Sized>(data: &ResponseData, rng: &mut R) -> PairedComparisons {
    let mut records = Vec::with_capacity(data.len() / 4);
    let mut buf: Vec<(usize, u8)> = Vec::new();
    for t in 0..data.n_users() {
        let responses = data.user_responses(t);
        if responses.len() < 2 {
            continue;
        }
        buf.clear();
        buf.extend_from_slice(responses);
        buf.shuffle(rng);
        for chunk in buf.chunks_exact(2) {
            let (a, b) = (chunk[0], chunk[1]);
            let ((item_i, xi), (item_j, xj)) = if a.0 > b.0 { (a, b) } else { (b, a) };
            if xi != xj {
                records.push(ComparisonRecord { item_i, item_j, user: t, outcome: u8::from(xi < xj) });
            }
        }
    }
    PairedComparisons::from_records(data.n_items(), records)
}

/// P[X_ti < X_tj | X_ti ≠ X_tj] = e^{θ_j}/(e^{θ_i}+e^{θ_j}), free of the user parameter.
#[inline]
pub fn btl_win_prob(theta_i: f64, theta_j: f64) -> f64 {
    sigmoid(theta_j - theta_i)
}

/// P[X_ti ≠ X_tj] = (e^{θ_j−ζ} + e^{θ_i−ζ}) / ((1 + e^{θ_i−ζ})(1 + e^{θ_j−ζ})).
pub fn disagreement_prob(theta_i: f64, theta_j: f64, zeta_t: f64) -> f64 {
    let pi = sigmoid(theta_i - zeta_t);
    let pj = sigmoid(theta_j - zeta_t);
    pi * (1.0 - pj) + pj * (1.0 - pi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairScheme {
    /// Weight m̃_t/(m_t(m_t−1)) per user.
    Weighted,
    /// Unit weights.
    Plain,
}

impl FromStr for PairScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wp" => Ok(PairScheme::Weighted),
            "pmle" => Ok(PairScheme::Plain),
            _ => Err(Error::UnknownName { kind: "pair scheme", name: s.to_string() }),
        }
    }
}

/// m̃_t/(m_t(m_t−1)), with m̃_t the largest even number ≤ m_t.
pub fn wp_weight(m_t: usize) -> f64 {
    if m_t < 2 {
        return 0.0;
    }
    let even = (m_t - m_t % 2) as f64;
    even / (m_t as f64 * (m_t - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedRecord {
    pub item_i: usize,
    pub item_j: usize,
    pub user: usize,
    pub outcome: u8,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPairs {
    pub m: usize,
    pub records: Vec<WeightedRecord>,
}

/// Every within-user pair of disagreeing responses, weighted per `scheme`.
pub fn enumerate_weighted_pairs(data: &ResponseData, scheme: PairScheme) -> WeightedPairs {
    let mut records = Vec::new();
    for t in 0..data.n_users() {
        let responses = data.user_responses(t);
        let weight = match scheme {
            PairScheme::Weighted => wp_weight(responses.len()),
            PairScheme::Plain => 1.0,
        };
        for (a, &(ia, xa)) in responses.iter().enumerate() {
            for &(ib, xb) in &responses[a + 1..] {
                if xa == xb {
                    continue;
                }
                let ((item_i, xi), (item_j, xj)) = if ia > ib { ((ia, xa), (ib, xb)) } else { ((ib, xb), (ia, xa)) };
                records.push(WeightedRecord { item_i, item_j, user: t, outcome: u8::from(xi < xj), weight });
            }
        }
    }
    WeightedPairs { m: data.n_items(), records }
}
