//! The monitor: per-state policy snapshots over a sliding window, reduced to
//! three stability descriptors (policy drift, action consensus, entropy
//! variance), plus the batch-entropy monitor used by the supervised harness.

use crate::error::{Error, Result};
use crate::numkernel::entropy;
use std::collections::VecDeque;

/// KL results are capped here instead of returning infinity: a
/// hard-deterministic distribution in the window would otherwise poison every
/// windowed mean.
pub const KL_CAP_NATS: f64 = 30.0;

/// Per-update record of the policy's action distribution at every probe state.
#[derive(Debug, Clone)]
pub struct PolicySnapshot {
    pub update_index: u64,
    /// `dists[s]` is the action distribution at probe state `s`.
    pub dists: Vec<Vec<f64>>,
}

/// Ring buffer of the most recent `capacity` snapshots.
#[derive(Debug, Clone)]
pub struct DescriptorWindow {
    capacity: usize,
    snapshots: VecDeque<PolicySnapshot>,
}

/// The monitor's output for one experience key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescriptorVector {
    /// Mean successive KL between consecutive snapshots, in nats.
    pub policy_drift: f64,
    /// Fraction of snapshots whose argmax agrees with the window's modal argmax.
    pub action_consensus: f64,
    /// Population variance of the policy entropy across snapshots, in nats^2.
    pub entropy_variance: f64,
}

impl DescriptorVector {
    pub fn as_array(&self) -> [f64; 3] {
        [self.policy_drift, self.action_consensus, self.entropy_variance]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        DescriptorVector {
            policy_drift: a[0],
            action_consensus: a[1],
            entropy_variance: a[2],
        }
    }
}

/// KL(p || q) in nats with 0*ln(0/q) := 0. Where p has mass and q has none
/// the divergence is infinite; the result is capped at [`KL_CAP_NATS`].
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut kl = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi <= 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return KL_CAP_NATS;
        }
        kl += pi * (pi / qi).ln();
    }
    kl.min(KL_CAP_NATS).max(0.0)
}

impl DescriptorWindow {
    pub fn new(capacity: usize) -> Self {
        DescriptorWindow {
            capacity: capacity.max(1),
            snapshots: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends the current per-probe-state distributions, evicting the oldest
    /// snapshot beyond capacity. `update_index` must be strictly increasing.
    pub fn record_snapshot(&mut self, update_index: u64, dists: Vec<Vec<f64>>) {
        if let Some(last) = self.snapshots.back() {
            debug_assert!(update_index > last.update_index);
        }
        self.snapshots.push_back(PolicySnapshot { update_index, dists });
        while self.snapshots.len() > self.capacity {
            self.snapshots.pop_front();
        }
    }

    /// Stability descriptors for one probe state over the current window.
    /// Needs at least two snapshots; callers skip the trust update otherwise.
    pub fn descriptors_for(&self, state: usize) -> Result<DescriptorVector> {
        if self.snapshots.len() < 2 {
            return Err(Error::insufficient(format!(
                "descriptors need >= 2 snapshots, have {}",
                self.snapshots.len()
            )));
        }
        let dists: Vec<&Vec<f64>> = self
            .snapshots
            .iter()
            .map(|s| {
                s.dists
                    .get(state)
                    .ok_or_else(|| Error::range(format!("state {state} not covered by snapshot")))
            })
            .collect::<Result<_>>()?;

        // Drift: mean KL(older || newer) over consecutive pairs.
        let mut drift = 0.0;
        for pair in dists.windows(2) {
            drift += kl_divergence(pair[0], pair[1]);
        }
        drift /= (dists.len() - 1) as f64;

        // Consensus: fraction of snapshots whose argmax equals the modal
        // argmax; all ties break toward the lowest action index.
        let argmaxes: Vec<usize> = dists.iter().map(|d| argmax(d)).collect();
        let n_actions = dists[0].len();
        let mut counts = vec![0usize; n_actions];
        for &a in &argmaxes {
            counts[a] += 1;
        }
        let modal = argmax_usize(&counts);
        let consensus =
            argmaxes.iter().filter(|&&a| a == modal).count() as f64 / argmaxes.len() as f64;

        // Entropy variance: population variance across snapshots.
        let entropies: Vec<f64> = dists
            .iter()
            .map(|d| entropy(d))
            .collect::<Result<_>>()?;
        let mean_h = entropies.iter().sum::<f64>() / entropies.len() as f64;
        let var_h = entropies.iter().map(|h| (h - mean_h) * (h - mean_h)).sum::<f64>()
            / entropies.len() as f64;

        Ok(DescriptorVector {
            policy_drift: drift,
            action_consensus: consensus,
            entropy_variance: var_h,
        })
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn argmax_usize(v: &[usize]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Mean entropy of a batch of probability rows. Logged, never backpropagated.
pub fn batch_mean_entropy(probs_batch: &[Vec<f64>]) -> Result<f64> {
    if probs_batch.is_empty() {
        return Err(Error::insufficient("empty batch"));
    }
    let mut total = 0.0;
    for row in probs_batch {
        total += entropy(row)?;
    }
    Ok(total / probs_batch.len() as f64)
}
