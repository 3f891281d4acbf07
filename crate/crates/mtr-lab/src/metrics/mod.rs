//! Diagnostic metrics (AUROC, Brier, NLL, reliability diagram) and the
//! return-aggregation conventions used by every experiment summary.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Parallel score/label arrays for binary diagnostics.
#[derive(Debug, Clone)]
pub struct BinaryScored {
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

impl BinaryScored {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::shape(format!(
                "scores ({}) and labels ({}) differ in length",
                scores.len(),
                labels.len()
            )));
        }
        if scores.is_empty() {
            return Err(Error::insufficient("empty score set"));
        }
        Ok(BinaryScored { scores, labels })
    }
}

/// Probability that a random positive outranks a random negative, ties
/// credited 0.5 (Mann-Whitney convention). Computed by rank-sum.
pub fn auroc(data: &BinaryScored) -> Result<f64> {
    let n_pos = data.labels.iter().filter(|&&l| l).count();
    let n_neg = data.labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUROC needs at least one positive and one negative".to_string(),
        ));
    }
    let mut order: Vec<usize> = (0..data.scores.len()).collect();
    order.sort_by(|&a, &b| data.scores[a].partial_cmp(&data.scores[b]).unwrap());

    // Average ranks across tie groups (1-based ranks).
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && data.scores[order[j + 1]] == data.scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if data.labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Mean squared error of probability scores against 0/1 labels.
pub fn brier(data: &BinaryScored) -> Result<f64> {
    for &s in &data.scores {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::domain(format!("Brier score out of [0,1]: {s}")));
        }
    }
    let n = data.scores.len() as f64;
    Ok(data
        .scores
        .iter()
        .zip(&data.labels)
        .map(|(&s, &l)| {
            let y = if l { 1.0 } else { 0.0 };
            (s - y) * (s - y)
        })
        .sum::<f64>()
        / n)
}

/// Mean negative log-likelihood; scores clamped to [1e-12, 1-1e-12].
/// Returns (nll, number of clamped scores).
pub fn nll(data: &BinaryScored) -> Result<(f64, usize)> {
    const FLOOR: f64 = 1e-12;
    let mut clamped = 0usize;
    let n = data.scores.len() as f64;
    let mut total = 0.0;
    for (&s, &l) in data.scores.iter().zip(&data.labels) {
        let mut p = s;
        if p < FLOOR {
            p = FLOOR;
            clamped += 1;
        } else if p > 1.0 - FLOOR {
            p = 1.0 - FLOOR;
            clamped += 1;
        }
        total -= if l { p.ln() } else { (1.0 - p).ln() };
    }
    Ok((total / n, clamped))
}

/// One bin of a reliability diagram. `mean_score`/`positive_rate` are `None`
/// for empty bins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub edge_lo: f64,
    pub edge_hi: f64,
    pub mean_score: Option<f64>,
    pub positive_rate: Option<f64>,
    pub count: usize,
}

/// Equal-width bins on [0, 1]; the last bin is right-closed so a score of
/// exactly 1.0 lands in it.
pub fn reliability_bins(data: &BinaryScored, n_bins: usize) -> Result<Vec<ReliabilityBin>> {
    if n_bins < 1 {
        return Err(Error::config("n_bins must be >= 1"));
    }
    for &s in &data.scores {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::domain(format!("reliability score out of [0,1]: {s}")));
        }
    }
    let mut sums = vec![0.0; n_bins];
    let mut positives = vec![0usize; n_bins];
    let mut counts = vec![0usize; n_bins];
    for (&s, &l) in data.scores.iter().zip(&data.labels) {
        let bin = ((s * n_bins as f64) as usize).min(n_bins - 1);
        sums[bin] += s;
        counts[bin] += 1;
        if l {
            positives[bin] += 1;
        }
    }
    Ok((0..n_bins)
        .map(|b| ReliabilityBin {
            edge_lo: b as f64 / n_bins as f64,
            edge_hi: (b + 1) as f64 / n_bins as f64,
            mean_score: (counts[b] > 0).then(|| sums[b] / counts[b] as f64),
            positive_rate: (counts[b] > 0).then(|| positives[b] as f64 / counts[b] as f64),
            count: counts[b],
        })
        .collect())
}

/// Per-seed evaluation curves on a shared checkpoint grid.
#[derive(Debug, Clone)]
pub struct ReturnCurves {
    /// One (step, eval return) array per seed.
    pub per_seed: Vec<Vec<(u64, f64)>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReturnSummary {
    /// Per-seed mean over the final ten checkpoints.
    pub per_seed_last10: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation across seeds.
    pub std: f64,
    /// Minimum per-seed last-10 mean (headline worst case).
    pub worst_seed_mean: f64,
    /// Minimum single checkpoint value inside any seed's final ten.
    pub worst_checkpoint: f64,
}

/// Seed-wise mean over the final ten checkpoints, then aggregated across
/// seeds (mean, population std, worst case).
pub fn summarize_returns(curves: &ReturnCurves) -> Result<ReturnSummary> {
    if curves.per_seed.is_empty() {
        return Err(Error::insufficient("no seeds"));
    }
    let mut per_seed_last10 = Vec::with_capacity(curves.per_seed.len());
    let mut worst_checkpoint = f64::INFINITY;
    for curve in &curves.per_seed {
        if curve.len() < 10 {
            return Err(Error::insufficient(format!(
                "need >= 10 checkpoints per seed, got {}",
                curve.len()
            )));
        }
        let tail = &curve[curve.len() - 10..];
        let mean = tail.iter().map(|&(_, r)| r).sum::<f64>() / 10.0;
        for &(_, r) in tail {
            if r < worst_checkpoint {
                worst_checkpoint = r;
            }
        }
        per_seed_last10.push(mean);
    }
    let n = per_seed_last10.len() as f64;
    let mean = per_seed_last10.iter().sum::<f64>() / n;
    let var = per_seed_last10.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let worst_seed_mean = per_seed_last10.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(ReturnSummary {
        per_seed_last10,
        mean,
        std: var.sqrt(),
        worst_seed_mean,
        worst_checkpoint,
    })
}
