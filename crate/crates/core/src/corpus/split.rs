use alloc::vec::Vec;

use super::{require_labels, CleanTweet, Label};
use crate::error::{bail, Result};
use crate::numerics::{streams, RngStream};

/// Train/test partition produced by [`split`].
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<CleanTweet>,
    pub test: Vec<CleanTweet>,
    pub ratio: f64,
    pub seed: u64,
    pub stratified: bool,
}

fn round_half_up(x: f64) -> usize {
    libm::floor(x + 0.5) as usize
}

/// Indices of `data` per label, in input order.
fn by_label(data: &[CleanTweet]) -> [(Label, Vec<usize>); 2] {
    Label::ALL.map(|l| {
        (
            l,
            data.iter()
                .enumerate()
                .filter(|(_, t)| t.label == Some(l))
                .map(|(i, _)| i)
                .collect(),
        )
    })
}

/// Picks `k` of `pool` uniformly; result sorted back into input order.
fn pick(pool: &[usize], k: usize, rng: &mut RngStream) -> Vec<usize> {
    let perm = rng.permutation(pool.len());
    let mut chosen: Vec<usize> = perm[..k].iter().map(|&p| pool[p]).collect();
    chosen.sort_unstable();
    chosen
}

fn gather(data: &[CleanTweet], mut idx: Vec<usize>) -> (Vec<CleanTweet>, Vec<CleanTweet>) {
    idx.sort_unstable();
    let mut chosen = Vec::with_capacity(idx.len());
    let mut rest = Vec::with_capacity(data.len() - idx.len());
    let mut it = idx.iter().peekable();
    for (i, t) in data.iter().enumerate() {
        if it.peek() == Some(&&i) {
            it.next();
            chosen.push(t.clone());
        } else {
            rest.push(t.clone());
        }
    }
    (chosen, rest)
}

/// Seeded train/test split. `|train| = round_half_up(ratio * N)`; when
/// stratified the rounding is applied per class. Both halves keep input
/// order.
pub fn split(data: &[CleanTweet], ratio: f64, seed: u64, stratified: bool) -> Result<DatasetSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        bail!(Config, "split ratio {} outside (0, 1)", ratio);
    }
    let mut rng = RngStream::new(seed, streams::SPLIT);
    let train_idx = if stratified {
        require_labels(data)?;
        let mut idx = Vec::new();
        for (_, pool) in by_label(data) {
            let k = round_half_up(ratio * pool.len() as f64).min(pool.len());
            idx.extend(pick(&pool, k, &mut rng));
        }
        idx
    } else {
        let all: Vec<usize> = (0..data.len()).collect();
        let k = round_half_up(ratio * data.len() as f64).min(data.len());
        pick(&all, k, &mut rng)
    };
    let (train, test) = gather(data, train_idx);
    Ok(DatasetSplit {
        train,
        test,
        ratio,
        seed,
        stratified,
    })
}

/// Stratified label subsample of `fraction` percent.
///
/// The total is `round_half_up(fraction * N / 100)`, divided between the
/// classes by largest remainder (ties go to the label that sorts first).
/// `fraction = 100` returns the input unchanged.
pub fn subsample_labels(train: &[CleanTweet], fraction: f64, seed: u64) -> Result<Vec<CleanTweet>> {
    if !(fraction > 0.0 && fraction <= 100.0) {
        bail!(Config, "label fraction {}% outside (0, 100]", fraction);
    }
    require_labels(train)?;
    if fraction == 100.0 {
        return Ok(train.to_vec());
    }
    let total = round_half_up(fraction * train.len() as f64 / 100.0);
    if total == 0 {
        bail!(
            Data,
            "{}% of {} records rounds to an empty subsample",
            fraction,
            train.len()
        );
    }
    let pools = by_label(train);
    let quotas: Vec<f64> = pools
        .iter()
        .map(|(_, p)| fraction * p.len() as f64 / 100.0)
        .collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| libm::floor(*q) as usize).collect();
    let mut order: Vec<usize> = (0..pools.len()).collect();
    // stable sort keeps label order for equal remainders
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - counts[a] as f64;
        let rb = quotas[b] - counts[b] as f64;
        rb.partial_cmp(&ra).unwrap_or(core::cmp::Ordering::Equal)
    });
    let mut missing = total.saturating_sub(counts.iter().sum());
    for &c in order.iter().cycle().take(2 * order.len()) {
        if missing == 0 {
            break;
        }
        if counts[c] < pools[c].1.len() {
            counts[c] += 1;
            missing -= 1;
        }
    }
    let mut rng = RngStream::new(seed, streams::SUBSAMPLE);
    let mut idx = Vec::with_capacity(total);
    for ((_, pool), &k) in pools.iter().zip(&counts) {
        idx.extend(pick(pool, k, &mut rng));
    }
    Ok(gather(train, idx).0)
}
