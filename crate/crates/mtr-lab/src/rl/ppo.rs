//! Clipped-surrogate policy optimization with per-sample trust weights on the
//! policy loss only. The value loss is never trust-weighted.

use super::buffer::RolloutBuffer;
use crate::core::SeededRng;
use crate::error::{Error, Result};
use crate::numkernel::{
    adam_step, entropy, mlp_backward, mlp_forward, softmax, AdamState, Matrix, MlpParams,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub epochs_per_batch: usize,
    pub minibatch_size: usize,
    pub rollout_length: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub lr0: f64,
    pub total_steps: u64,
    /// Environment steps between deterministic evaluations. 0 means
    /// `total_steps / 30`.
    pub eval_interval: u64,
    pub hidden: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            epochs_per_batch: 4,
            minibatch_size: 64,
            rollout_length: 512,
            value_coef: 0.5,
            entropy_coef: 0.0,
            lr0: 3e-4,
            total_steps: 100_000,
            eval_interval: 0,
            hidden: 64,
        }
    }
}

impl PpoConfig {
    pub fn effective_eval_interval(&self) -> u64 {
        if self.eval_interval == 0 {
            (self.total_steps / 30).max(1)
        } else {
            self.eval_interval
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::config("gamma and gae_lambda must be in [0,1]"));
        }
        if self.clip_eps <= 0.0 {
            return Err(Error::config("clip_eps must be positive"));
        }
        if self.minibatch_size == 0 || self.rollout_length == 0 || self.epochs_per_batch == 0 {
            return Err(Error::config("batch geometry must be positive"));
        }
        if self.total_steps == 0 {
            return Err(Error::config("total_steps must be positive"));
        }
        Ok(())
    }
}

/// One-hot encode a batch of discrete states.
pub fn one_hot_batch(states: &[usize], n_states: usize) -> Matrix {
    let mut m = Matrix::zeros(states.len(), n_states);
    for (i, &s) in states.iter().enumerate() {
        m.set(i, s, 1.0);
    }
    m
}

/// Action distributions at every state (rows of a batched forward pass over
/// the identity input).
pub fn policy_distributions(policy: &MlpParams, n_states: usize) -> Result<Vec<Vec<f64>>> {
    let all: Vec<usize> = (0..n_states).collect();
    let (logits, _) = mlp_forward(policy, &one_hot_batch(&all, n_states))?;
    Ok((0..n_states).map(|s| softmax(logits.row(s))).collect())
}

/// Mean over the batch of `w_i * clip-surrogate_i`; the divisor is the batch
/// size, not the weight sum. Exposed for direct testing; the update path
/// computes the same quantity fused with its gradient.
pub fn trust_weighted_policy_loss(surrogates: &[f64], weights: &[f64]) -> Result<f64> {
    if surrogates.is_empty() {
        return Err(Error::insufficient("empty batch"));
    }
    if surrogates.len() != weights.len() {
        return Err(Error::shape("weights do not match batch".to_string()));
    }
    let n = surrogates.len() as f64;
    Ok(surrogates.iter().zip(weights).map(|(&s, &w)| w * s).sum::<f64>() / n)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PpoDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub approx_kl: f64,
}

/// Runs `epochs_per_batch` passes of minibatch Adam over the buffer.
/// `weights[i]` is the trust weight of sample `i` (1.0 for unweighted PPO).
#[allow(clippy::too_many_arguments)]
pub fn ppo_update(
    buffer: &RolloutBuffer,
    weights: &[f64],
    policy: &mut MlpParams,
    value_net: &mut MlpParams,
    adam_policy: &mut AdamState,
    adam_value: &mut AdamState,
    cfg: &PpoConfig,
    lr: f64,
    n_states: usize,
    shuffle_rng: &mut SeededRng,
) -> Result<PpoDiagnostics> {
    let t_len = buffer.len();
    if t_len == 0 {
        return Err(Error::insufficient("empty rollout buffer"));
    }
    if weights.len() != t_len {
        return Err(Error::shape("weights do not match buffer".to_string()));
    }
    if buffer.advantages.len() != t_len {
        return Err(Error::InsufficientData(
            "advantages must be computed before the update".to_string(),
        ));
    }

    // Normalize advantages over the whole buffer, then weight.
    let mean_adv = buffer.advantages.iter().sum::<f64>() / t_len as f64;
    let var_adv = buffer
        .advantages
        .iter()
        .map(|a| (a - mean_adv) * (a - mean_adv))
        .sum::<f64>()
        / t_len as f64;
    let std_adv = var_adv.sqrt() + 1e-8;
    let advantages: Vec<f64> = buffer.advantages.iter().map(|a| (a - mean_adv) / std_adv).collect();

    let mut indices: Vec<usize> = (0..t_len).collect();
    let mut diag = PpoDiagnostics::default();
    let mut n_minibatches = 0usize;

    for _ in 0..cfg.epochs_per_batch {
        shuffle_rng.shuffle(&mut indices);
        for chunk in indices.chunks(cfg.minibatch_size) {
            let b = chunk.len();
            let states: Vec<usize> = chunk.iter().map(|&i| buffer.states[i]).collect();
            let x = one_hot_batch(&states, n_states);

            // Policy head.
            let (logits, cache_p) = mlp_forward(policy, &x)?;
            let n_actions = logits.cols();
            let mut grad_logits = Matrix::zeros(b, n_actions);
            let mut policy_loss = 0.0;
            let mut kl_sum = 0.0;
            for (row, &i) in chunk.iter().enumerate() {
                let probs = softmax(logits.row(row));
                let a = buffer.actions[i];
                let logp_new = probs[a].max(1e-300).ln();
                let ratio = (logp_new - buffer.logps[i]).exp();
                kl_sum += buffer.logps[i] - logp_new;
                let adv = advantages[i];
                let w = weights[i];

                let unclipped = ratio * adv;
                let clipped = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv;
                let surrogate = unclipped.min(clipped);
                policy_loss -= w * surrogate / b as f64;
                // Gradient flows only while the unclipped branch is active.
                let clip_blocked = (ratio > 1.0 + cfg.clip_eps && adv > 0.0)
                    || (ratio < 1.0 - cfg.clip_eps && adv < 0.0);
                let scale = if clip_blocked { 0.0 } else { -w * adv * ratio / b as f64 };

                let h = entropy(&probs)?;
                policy_loss -= cfg.entropy_coef * h / b as f64;
                let g = grad_logits.row_mut(row);
                for (k, gk) in g.iter_mut().enumerate() {
                    let indicator = if k == a { 1.0 } else { 0.0 };
                    *gk = scale * (indicator - probs[k]);
                    if cfg.entropy_coef != 0.0 {
                        // d(-c*H)/dz_k = c * p_k (ln p_k + H)
                        *gk += cfg.entropy_coef * probs[k] * (probs[k].max(1e-300).ln() + h)
                            / b as f64;
                    }
                }
            }
            let grads_p = mlp_backward(policy, &cache_p, &grad_logits)?;
            adam_step(policy, &grads_p, adam_policy, lr)?;

            // Value head (not trust-weighted).
            let (v_out, cache_v) = mlp_forward(value_net, &x)?;
            let mut grad_v = Matrix::zeros(b, 1);
            let mut value_loss = 0.0;
            for (row, &i) in chunk.iter().enumerate() {
                let v = v_out.get(row, 0);
                let err = v - buffer.returns[i];
                value_loss += cfg.value_coef * err * err / b as f64;
                grad_v.set(row, 0, cfg.value_coef * 2.0 * err / b as f64);
            }
            let grads_v = mlp_backward(value_net, &cache_v, &grad_v)?;
            adam_step(value_net, &grads_v, adam_value, lr)?;

            diag.policy_loss += policy_loss;
            diag.value_loss += value_loss;
            diag.approx_kl += kl_sum / b as f64;
            n_minibatches += 1;
        }
    }
    if n_minibatches > 0 {
        diag.policy_loss /= n_minibatches as f64;
        diag.value_loss /= n_minibatches as f64;
        diag.approx_kl /= n_minibatches as f64;
    }
    Ok(diag)
}
