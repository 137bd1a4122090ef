//! The bundled LSAT Section 6 corpus (Bock and Lieberman, 1970).
//!
//! 1000 examinees answered 5 items. The data is the classic 32-pattern
//! frequency table; patterns are stored as "answered correctly" bits with
//! item 1 as the most significant bit. Responses follow the crate convention
//! `X = 1` for an incorrect answer, so a larger θ means a harder item.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::{estimate, top_k, EstimatorConfig, Method};
use crate::model::{Response, ResponseData};
use crate::rng::{derive_seed, stream_rng, Stream};

pub const N_USERS: usize = 1000;
pub const N_ITEMS: usize = 5;

/// Number of examinees with each correctness pattern, patterns 00000 to 11111.
pub const PATTERN_COUNTS: [usize; 32] = [
    3, 6, 2, 11, 1, 1, 3, 4, 1, 8, 0, 16, 0, 3, 2, 15, 10, 29, 14, 81, 3, 28, 15, 80, 16, 56, 21, 173, 11, 61, 28, 298,
];

/// Correct answers per item.
pub const TOTAL_CORRECT: [usize; N_ITEMS] = [924, 709, 553, 763, 870];

/// SHA-256 of the corpus written by [`ResponseData::write_csv`].
pub const CSV_SHA256: &str = "d8080fa0aea444dda22ba1377558d7914ec720703e96f4e3dbd0ea1ccdf2cee0";

/// The corpus as responses, examinees ordered by pattern.
pub fn corpus() -> ResponseData {
    let mut rows = Vec::with_capacity(N_USERS);
    for (pattern, &count) in PATTERN_COUNTS.iter().enumerate() {
        let row: Vec<u8> = (0..N_ITEMS)
            .map(|i| {
                let correct = (pattern >> (N_ITEMS - 1 - i)) & 1;
                1 - correct as u8
            })
            .collect();
        rows.extend(std::iter::repeat_n(row, count));
    }
    ResponseData::from_dense(&rows).expect("bundled corpus is well formed")
}

/// Correct answers per item in `data` (responses equal to 0).
pub fn correct_totals(data: &ResponseData) -> Vec<usize> {
    let mut totals = vec![0; data.n_items()];
    for e in data.edges() {
        if e.value == 0 {
            totals[e.item] += 1;
        }
    }
    totals
}

/// The corpus in long CSV form.
pub fn corpus_csv() -> Vec<u8> {
    let mut buf = Vec::new();
    corpus().write_csv(&mut buf).expect("writing to memory");
    buf
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Checks the embedded corpus against its frozen checksum and item totals.
pub fn verify_corpus() -> Result<()> {
    let data = corpus();
    if correct_totals(&data) != TOTAL_CORRECT {
        return Err(Error::InvalidData("LSAT item totals do not match".into()));
    }
    let digest = sha256_hex(&corpus_csv());
    if digest != CSV_SHA256 {
        return Err(Error::InvalidData(format!("LSAT checksum mismatch: {digest}")));
    }
    Ok(())
}

/// A subsample of users and items, relabelled `0..n_users` and `0..n_items`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsample {
    pub data: ResponseData,
    /// Original index of each retained user, ascending.
    pub users: Vec<usize>,
    /// Original index of each retained item, ascending.
    pub items: Vec<usize>,
}

/// Draws `n_users` users and `n_items` items uniformly without replacement.
/// Taking everything returns the data unchanged.
pub fn subsample<R: Rng + ?Sized>(
    data: &ResponseData,
    n_users: usize,
    n_items: usize,
    rng: &mut R,
) -> Result<Subsample> {
    if n_users == 0 || n_users > data.n_users() || n_items == 0 || n_items > data.n_items() {
        return Err(Error::InvalidArgument(format!(
            "subsample {n_users} x {n_items} is outside 1..={} x 1..={}",
            data.n_users(),
            data.n_items()
        )));
    }
    let mut users = sample(rng, data.n_users(), n_users).into_vec();
    let mut items = sample(rng, data.n_items(), n_items).into_vec();
    users.sort_unstable();
    items.sort_unstable();
    let mut item_map = vec![None; data.n_items()];
    for (new, &old) in items.iter().enumerate() {
        item_map[old] = Some(new);
    }
    let mut edges = Vec::new();
    for (new_user, &t) in users.iter().enumerate() {
        for &(i, value) in data.user_responses(t) {
            if let Some(item) = item_map[i] {
                edges.push(Response { user: new_user, item, value });
            }
        }
    }
    Ok(Subsample { data: ResponseData::new(n_users, n_items, edges)?, users, items })
}

/// Top-1 recovery of MRP-MLE and PMLE on repeated subsamples of the corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Top1Recovery {
    pub n_users: usize,
    pub n_items: usize,
    pub n_split: usize,
    pub trials: usize,
    /// Trials where both estimators exist; rates are over these.
    pub completed: usize,
    pub mrp_rate: f64,
    pub pmle_rate: f64,
}

/// For each trial, subsamples `n_users × n_items` and checks whether each
/// estimator's hardest item is the hardest retained item under the full-data
/// WP-MLE. Both estimators see the same subsample.
pub fn top1_recovery(n_users: usize, n_items: usize, trials: usize, n_split: usize, seed: u64) -> Result<Top1Recovery> {
    if trials == 0 || n_split == 0 {
        return Err(Error::InvalidArgument("trials and n_split must be at least 1".into()));
    }
    let data = corpus();
    let reference = estimate(&data, &EstimatorConfig::new(Method::Wp))?.theta_hat;
    let outcomes: Vec<Result<Option<(bool, bool)>>> = (0..trials)
        .into_par_iter()
        .map(|r| {
            let trial_seed = derive_seed(seed, r as u64);
            let sub = subsample(&data, n_users, n_items, &mut stream_rng(trial_seed, Stream::Subsample))?;
            let truth: Vec<f64> = sub.items.iter().map(|&i| reference[i]).collect();
            let best = top_k(&truth, 1)?[0];
            let mrp = estimate(&sub.data, &EstimatorConfig::new(Method::Mrp).seed(trial_seed).n_split(n_split));
            let pmle = estimate(&sub.data, &EstimatorConfig::new(Method::Pmle));
            match (mrp, pmle) {
                (Ok(a), Ok(b)) => Ok(Some((top_k(&a.theta_hat, 1)?[0] == best, top_k(&b.theta_hat, 1)?[0] == best))),
                (Err(e), _) | (_, Err(e)) if e.is_usage() => Err(e),
                _ => Ok(None),
            }
        })
        .collect();
    let mut completed = 0usize;
    let (mut mrp_hits, mut pmle_hits) = (0usize, 0usize);
    for o in outcomes {
        if let Some((a, b)) = o? {
            completed += 1;
            mrp_hits += usize::from(a);
            pmle_hits += usize::from(b);
        }
    }
    let rate = |hits: usize| {
        if completed == 0 {
            f64::NAN
        } else {
            hits as f64 / completed as f64
        }
    };
    Ok(Top1Recovery {
        n_users,
        n_items,
        n_split,
        trials,
        completed,
        mrp_rate: rate(mrp_hits),
        pmle_rate: rate(pmle_hits),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_and_shape() {
        let data = corpus();
        assert_eq!(PATTERN_COUNTS.iter().sum::<usize>(), N_USERS);
        assert_eq!((data.n_users(), data.n_items(), data.len()), (1000, 5, 5000));
        assert_eq!(correct_totals(&data), TOTAL_CORRECT);
        assert!((0..N_USERS).all(|t| data.user_degree(t) == 5));
    }

    #[test]
    fn checksum_is_frozen() {
        verify_corpus().unwrap();
        let text = String::from_utf8(corpus_csv()).unwrap();
        assert_eq!(text.lines().count(), 5001);
        assert!(text.starts_with("user_id,item_id,response\n0,0,1\n"));
    }

    #[test]
    fn full_subsample_is_identity() {
        let data = corpus();
        let sub = subsample(&data, 1000, 5, &mut stream_rng(3, Stream::Subsample)).unwrap();
        assert_eq!(sub.data, data);
        assert_eq!(sub.items, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn subsample_relabels() {
        let data = corpus();
        let sub = subsample(&data, 200, 4, &mut stream_rng(9, Stream::Subsample)).unwrap();
        assert_eq!((sub.data.n_users(), sub.data.n_items(), sub.data.len()), (200, 4, 800));
        for (t, &orig_t) in sub.users.iter().enumerate() {
            for (i, &orig_i) in sub.items.iter().enumerate() {
                assert_eq!(sub.data.response(t, i), data.response(orig_t, orig_i));
            }
        }
        let mut rng = stream_rng(1, Stream::Subsample);
        assert!(subsample(&data, 0, 4, &mut rng).is_err());
        assert!(subsample(&data, 10, 6, &mut rng).is_err());
        assert!(subsample(&data, 1001, 4, &mut rng).is_err());
    }
}
