//! The full training loop: rollout collection, corruption, trust-weighted
//! PPO updates, monitor snapshots, slow trust refits, and deterministic
//! clean-reward evaluation.

use super::buffer::RolloutBuffer;
use super::ppo::{policy_distributions, ppo_update, PpoConfig};
use crate::core::{derive_rng, phase_of, Phase, PhaseSchedule, SeededRng};
use crate::envs::{apply_corruption, CorruptionMode, Env};
use crate::error::{Error, Result};
use crate::metrics::{auroc, BinaryScored};
use crate::monitor::DescriptorWindow;
use crate::numkernel::{
    entropy, linear_decay, mlp_forward, softmax, Activation, AdamState, MlpParams,
};
use crate::trust::{
    crossed_refit_boundary, update_trust, DescriptorMemory, TrustFitOptions, TrustModel,
    TrustState,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Self-diagnosis block: the monitor window, refit cadence, and smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdConfig {
    pub enabled: bool,
    pub window: usize,
    /// Refit interval in environment steps; 0 disables refitting entirely.
    pub refit_interval: u64,
    pub ema_alpha: f64,
}

impl Default for SdConfig {
    fn default() -> Self {
        SdConfig {
            enabled: true,
            window: 50,
            refit_interval: 1000,
            ema_alpha: 0.1,
        }
    }
}

impl SdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::config("sd.window must be >= 2"));
        }
        if !(self.ema_alpha > 0.0 && self.ema_alpha <= 1.0) {
            return Err(Error::config("sd.ema_alpha must be in (0, 1]"));
        }
        Ok(())
    }

    pub fn interval(&self) -> Option<u64> {
        if self.refit_interval == 0 {
            None
        } else {
            Some(self.refit_interval)
        }
    }
}

/// One row of `rl_metrics.csv`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RlMetricsRecord {
    pub step: u64,
    pub phase: String,
    pub eval_return_clean: f64,
    pub mean_trust_reliable: Option<f64>,
    pub mean_trust_unreliable: Option<f64>,
    pub trust_rho_auroc: Option<f64>,
    pub mean_policy_entropy: f64,
    pub lr: f64,
}

/// One row of `trust.csv`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrustEvent {
    pub step: u64,
    pub key: usize,
    pub w_raw: f64,
    pub w_smoothed: f64,
    pub stable_component_mean_drift: f64,
}

/// One row of `descriptors.csv`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DescriptorRow {
    pub step: u64,
    pub state: usize,
    pub drift: f64,
    pub consensus: f64,
    pub entropy_var: f64,
}

/// Run-level aggregates over every collected experience, computed from the
/// trust weight each experience carried when it was collected.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RlRunSummary {
    pub seed: u64,
    pub final_eval_return: f64,
    pub run_mean_trust: f64,
    pub mean_trust_reliable: Option<f64>,
    pub mean_trust_unreliable: Option<f64>,
    pub trust_rho_auroc: Option<f64>,
    /// Mean collection-time trust over the final 10% of the clean phase.
    pub trust_clean_final: Option<f64>,
    /// Mean collection-time trust over the final 10% of the recover phase.
    pub trust_recover_final: Option<f64>,
    pub saw_unreliable: bool,
}

#[derive(Debug)]
pub struct RlRunResult {
    pub summary: RlRunSummary,
    pub metrics: Vec<RlMetricsRecord>,
    pub trust_events: Vec<TrustEvent>,
    pub descriptor_rows: Vec<DescriptorRow>,
    /// Mean smoothed trust after each environment step (piecewise constant
    /// between refits); drives the trust-interval sweep metrics.
    pub mean_trust_by_step: Vec<f32>,
    pub final_policy: Vec<f64>,
    pub final_value: Vec<f64>,
}

pub struct RlRunSpec<'a> {
    pub env: &'a dyn Env,
    pub schedule: PhaseSchedule,
    pub corruption: CorruptionMode,
    pub ppo: PpoConfig,
    pub sd: SdConfig,
    pub seed: u64,
}

/// Deterministic argmax rollout on clean rewards; never touches training RNG.
pub fn eval_return_clean(env: &dyn Env, policy: &MlpParams) -> Result<f64> {
    let mut state = env.start_state();
    let mut total = 0.0;
    for _ in 0..env.horizon() {
        let dists = policy_probs_one(policy, state, env.n_states())?;
        let action = argmax(&dists);
        let t = env.step(state, action)?;
        total += t.reward_true;
        if t.done {
            break;
        }
        state = t.next_state;
    }
    Ok(total)
}

fn policy_probs_one(policy: &MlpParams, state: usize, n_states: usize) -> Result<Vec<f64>> {
    let x = super::ppo::one_hot_batch(&[state], n_states);
    let (logits, _) = mlp_forward(policy, &x)?;
    Ok(softmax(logits.row(0)))
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

fn sample_categorical(probs: &[f64], rng: &mut SeededRng) -> usize {
    let mut u = rng.uniform();
    for (i, &p) in probs.iter().enumerate() {
        if u < p {
            return i;
        }
        u -= p;
    }
    probs.len() - 1
}

pub fn train_rl(spec: &RlRunSpec) -> Result<RlRunResult> {
    spec.ppo.validate()?;
    spec.sd.validate()?;
    spec.corruption.validate()?;
    let env = spec.env;
    let n_states = env.n_states();
    let n_actions = env.n_actions();
    let total = spec.ppo.total_steps;
    if spec.schedule.total_steps != total {
        return Err(Error::config("schedule and ppo total_steps disagree"));
    }

    let base = SeededRng::new(spec.seed, "rl");
    let mut rng_policy_init = derive_rng(&base, "policy_init");
    let mut rng_value_init = derive_rng(&base, "value_init");
    let mut rng_actions = derive_rng(&base, "actions");
    let mut rng_corrupt = derive_rng(&base, "corrupt");
    let mut rng_shuffle = derive_rng(&base, "shuffle");
    let mut rng_trust = derive_rng(&base, "trust");

    let h = spec.ppo.hidden;
    let mut policy = MlpParams::init(&[n_states, h, h, n_actions], Activation::Tanh, &mut rng_policy_init)?;
    let mut value_net = MlpParams::init(&[n_states, h, h, 1], Activation::Tanh, &mut rng_value_init)?;
    let mut adam_policy = AdamState::new(&policy);
    let mut adam_value = AdamState::new(&value_net);

    let mut window = DescriptorWindow::new(spec.sd.window);
    let mut trust_state = TrustState::new(spec.sd.ema_alpha, spec.sd.interval());
    let mut memory = DescriptorMemory::new(total / 2, 64);
    let trust_opts = TrustFitOptions::default();
    let mut occurrences: VecDeque<(u64, usize)> = VecDeque::new();

    // Per-experience logs for run-level diagnostics.
    let mut exp_trust: Vec<f64> = Vec::with_capacity(total as usize);
    let mut exp_rho: Vec<bool> = Vec::with_capacity(total as usize);
    let mut exp_step: Vec<u64> = Vec::with_capacity(total as usize);
    let mut mean_trust_by_step: Vec<f32> = Vec::with_capacity(total as usize);

    let mut metrics: Vec<RlMetricsRecord> = Vec::new();
    let mut trust_events: Vec<TrustEvent> = Vec::new();
    let mut descriptor_rows: Vec<DescriptorRow> = Vec::new();

    let eval_interval = spec.ppo.effective_eval_interval();
    // Aggregates over experiences since the previous checkpoint.
    let mut ckpt_rel_sum = 0.0;
    let mut ckpt_rel_n = 0usize;
    let mut ckpt_unrel_sum = 0.0;
    let mut ckpt_unrel_n = 0usize;

    let mut state = env.start_state();
    let mut episode_len: u32 = 0;
    let mut global_step: u64 = 0;
    let mut update_index: u64 = 0;
    let mut buffer = RolloutBuffer::with_capacity(spec.ppo.rollout_length);

    let record_checkpoint = |metrics: &mut Vec<RlMetricsRecord>,
                             policy: &MlpParams,
                             step: u64,
                             rel: (f64, usize),
                             unrel: (f64, usize),
                             exp_trust: &[f64],
                             exp_rho: &[bool]|
     -> Result<()> {
        let eval = eval_return_clean(env, policy)?;
        let dists = policy_distributions(policy, n_states)?;
        let mut mean_h = 0.0;
        for d in &dists {
            mean_h += entropy(d)?;
        }
        mean_h /= n_states as f64;
        let phase_step = step.min(total - 1);
        let auroc_so_far = cumulative_auroc(exp_trust, exp_rho);
        metrics.push(RlMetricsRecord {
            step,
            phase: phase_of(phase_step, &spec.schedule)?.as_str().to_string(),
            eval_return_clean: eval,
            mean_trust_reliable: (rel.1 > 0).then(|| rel.0 / rel.1 as f64),
            mean_trust_unreliable: (unrel.1 > 0).then(|| unrel.0 / unrel.1 as f64),
            trust_rho_auroc: auroc_so_far,
            mean_policy_entropy: mean_h,
            lr: linear_decay(spec.ppo.lr0, step, total),
        });
        Ok(())
    };

    // Initial checkpoint before any training.
    record_checkpoint(&mut metrics, &policy, 0, (0.0, 0), (0.0, 0), &exp_trust, &exp_rho)?;

    while global_step < total {
        let t_len = spec.ppo.rollout_length.min((total - global_step) as usize);
        let step_before = global_step;
        buffer.clear();
        let mut last_done = false;

        for _ in 0..t_len {
            let probs = policy_probs_one(&policy, state, n_states)?;
            let action = sample_categorical(&probs, &mut rng_actions);
            let logp = probs[action].max(1e-300).ln();
            let x = super::ppo::one_hot_batch(&[state], n_states);
            let (v_out, _) = mlp_forward(&value_net, &x)?;
            let v = v_out.get(0, 0);

            let t = env.step(state, action)?;
            let (r_obs, reliable) = apply_corruption(
                t.reward_true,
                state,
                global_step,
                &spec.schedule,
                &spec.corruption,
                &mut rng_corrupt,
            )?;

            let w_now = if spec.sd.enabled { trust_state.get(state) } else { 1.0 };
            exp_trust.push(w_now);
            exp_rho.push(reliable);
            exp_step.push(global_step);
            mean_trust_by_step.push(trust_state.mean_weight() as f32);
            if reliable {
                ckpt_rel_sum += w_now;
                ckpt_rel_n += 1;
            } else {
                ckpt_unrel_sum += w_now;
                ckpt_unrel_n += 1;
            }

            episode_len += 1;
            let timeout = episode_len >= env.horizon();
            let done = t.done || timeout;
            buffer.push(state, action, r_obs, done, logp, v, global_step, t.reward_true, reliable);
            occurrences.push_back((global_step, state));
            last_done = done;
            if done {
                state = env.start_state();
                episode_len = 0;
            } else {
                state = t.next_state;
            }
            global_step += 1;
        }

        // Bootstrap value for the state following the last stored step.
        let bootstrap = if last_done {
            0.0
        } else {
            let x = super::ppo::one_hot_batch(&[state], n_states);
            let (v_out, _) = mlp_forward(&value_net, &x)?;
            v_out.get(0, 0)
        };
        buffer.compute_gae(spec.ppo.gamma, spec.ppo.gae_lambda, bootstrap)?;

        let weights: Vec<f64> = if spec.sd.enabled {
            buffer.states.iter().map(|&s| trust_state.get(s)).collect()
        } else {
            vec![1.0; buffer.len()]
        };
        let lr = linear_decay(spec.ppo.lr0, global_step, total);
        ppo_update(
            &buffer,
            &weights,
            &mut policy,
            &mut value_net,
            &mut adam_policy,
            &mut adam_value,
            &spec.ppo,
            lr,
            n_states,
            &mut rng_shuffle,
        )?;
        update_index += 1;

        if spec.sd.enabled {
            window.record_snapshot(update_index, policy_distributions(&policy, n_states)?);

            if let Some(k) = spec.sd.interval() {
                if crossed_refit_boundary(step_before, global_step, k) {
                    while occurrences.front().is_some_and(|&(s, _)| s + k <= global_step) {
                        occurrences.pop_front();
                    }
                    refit_trust(
                        global_step,
                        &occurrences,
                        &window,
                        &mut memory,
                        &mut trust_state,
                        &trust_opts,
                        spec.sd.ema_alpha,
                        &mut rng_trust,
                        &mut trust_events,
                        &mut descriptor_rows,
                    )?;
                }
            }
        }

        if global_step / eval_interval > step_before / eval_interval || global_step >= total {
            record_checkpoint(
                &mut metrics,
                &policy,
                global_step,
                (ckpt_rel_sum, ckpt_rel_n),
                (ckpt_unrel_sum, ckpt_unrel_n),
                &exp_trust,
                &exp_rho,
            )?;
            ckpt_rel_sum = 0.0;
            ckpt_rel_n = 0;
            ckpt_unrel_sum = 0.0;
            ckpt_unrel_n = 0;
        }
    }

    // Run-level aggregates.
    let n_exp = exp_trust.len() as f64;
    let run_mean_trust = exp_trust.iter().sum::<f64>() / n_exp;
    let (mut rel_sum, mut rel_n, mut unrel_sum, mut unrel_n) = (0.0, 0usize, 0.0, 0usize);
    for (&w, &r) in exp_trust.iter().zip(&exp_rho) {
        if r {
            rel_sum += w;
            rel_n += 1;
        } else {
            unrel_sum += w;
            unrel_n += 1;
        }
    }
    let phase_window_mean = |phase: Phase| -> Option<f64> {
        let (lo, hi) = phase_tail_window(&spec.schedule, phase)?;
        let mut sum = 0.0;
        let mut n = 0usize;
        for (&w, &s) in exp_trust.iter().zip(&exp_step) {
            if s >= lo && s < hi {
                sum += w;
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    };

    let summary = RlRunSummary {
        seed: spec.seed,
        final_eval_return: metrics.last().map(|m| m.eval_return_clean).unwrap_or(0.0),
        run_mean_trust,
        mean_trust_reliable: (rel_n > 0).then(|| rel_sum / rel_n as f64),
        mean_trust_unreliable: (unrel_n > 0).then(|| unrel_sum / unrel_n as f64),
        trust_rho_auroc: cumulative_auroc(&exp_trust, &exp_rho),
        trust_clean_final: phase_window_mean(Phase::Clean),
        trust_recover_final: phase_window_mean(Phase::Recover),
        saw_unreliable: unrel_n > 0,
    };

    Ok(RlRunResult {
        summary,
        metrics,
        trust_events,
        descriptor_rows,
        mean_trust_by_step,
        final_policy: policy.flat(),
        final_value: value_net.flat(),
    })
}

/// Final 10% of a phase as a [lo, hi) step range.
fn phase_tail_window(schedule: &PhaseSchedule, phase: Phase) -> Option<(u64, u64)> {
    let total = schedule.total_steps as f64;
    let (start, end) = match phase {
        Phase::Clean => (0.0, schedule.clean_end * total),
        Phase::Corrupt => (schedule.clean_end * total, schedule.corrupt_end * total),
        Phase::Recover => (schedule.corrupt_end * total, total),
    };
    let len = end - start;
    if len <= 0.0 {
        return None;
    }
    Some(((end - 0.1 * len) as u64, end as u64))
}

fn cumulative_auroc(trust: &[f64], rho: &[bool]) -> Option<f64> {
    let has_pos = rho.iter().any(|&r| r);
    let has_neg = rho.iter().any(|&r| !r);
    if !has_pos || !has_neg {
        return None;
    }
    // Reliability is the positive label; trust should rank it higher.
    let data = BinaryScored::new(trust.to_vec(), rho.to_vec()).ok()?;
    auroc(&data).ok()
}

#[allow(clippy::too_many_arguments)]
fn refit_trust(
    step: u64,
    occurrences: &VecDeque<(u64, usize)>,
    window: &DescriptorWindow,
    memory: &mut DescriptorMemory,
    trust_state: &mut TrustState,
    opts: &TrustFitOptions,
    alpha: f64,
    rng: &mut SeededRng,
    trust_events: &mut Vec<TrustEvent>,
    descriptor_rows: &mut Vec<DescriptorRow>,
) -> Result<()> {
    const MAX_OCCURRENCE_POINTS: usize = 1024;

    let keys: BTreeSet<usize> = occurrences.iter().map(|&(_, s)| s).collect();
    let mut fresh: BTreeMap<usize, [f64; 3]> = BTreeMap::new();
    for &key in &keys {
        if let Ok(d) = window.descriptors_for(key) {
            fresh.insert(key, d.as_array());
        }
    }
    if fresh.is_empty() {
        return Ok(());
    }
    for (&key, &d) in &fresh {
        descriptor_rows.push(DescriptorRow {
            step,
            state: key,
            drift: d[0],
            consensus: d[1],
            entropy_var: d[2],
        });
    }
    memory.record(step, fresh.iter().map(|(&k, &d)| (k, d)).collect());

    // Fit set: remembered per-refit key descriptors plus the current window's
    // experiences, one point per occurrence (evenly subsampled).
    let mut points = memory.points();
    let occ: Vec<usize> = occurrences
        .iter()
        .filter(|&&(_, s)| fresh.contains_key(&s))
        .map(|&(_, s)| s)
        .collect();
    let take = occ.len().min(MAX_OCCURRENCE_POINTS);
    for i in 0..take {
        let idx = if take == occ.len() { i } else { i * (occ.len() - 1) / (take - 1) };
        points.push(fresh[&occ[idx]]);
    }

    let model = match TrustModel::fit(&points, rng, opts) {
        Ok(m) => m,
        // Too little data: keep the previous trust map untouched.
        Err(Error::InsufficientData(_)) => return Ok(()),
        Err(e) => return Err(e),
    };

    let mut raw: BTreeMap<usize, f64> = BTreeMap::new();
    for (&key, &d) in &fresh {
        raw.insert(key, model.weight(&crate::monitor::DescriptorVector::from_array(d)));
    }
    update_trust(trust_state, &raw, alpha)?;
    let drift = model.stable_mean_drift();
    for (&key, &w_raw) in &raw {
        trust_events.push(TrustEvent {
            step,
            key,
            w_raw,
            w_smoothed: trust_state.get(key),
            stable_component_mean_drift: drift,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::ChainEnv;

    fn quick_spec(env: &ChainEnv, sd_enabled: bool, refit: u64, total: u64) -> RlRunSpec<'_> {
        RlRunSpec {
            env,
            schedule: PhaseSchedule::with_default_phases(total),
            corruption: CorruptionMode::None,
            ppo: PpoConfig {
                total_steps: total,
                rollout_length: 128,
                minibatch_size: 32,
                hidden: 16,
                ..Default::default()
            },
            sd: SdConfig { enabled: sd_enabled, refit_interval: refit, ..Default::default() },
            seed: 3,
        }
    }

    #[test]
    fn sd_disabled_and_inert_sd_produce_identical_trajectories() {
        let env = ChainEnv::new(5).unwrap();
        // refit_interval = 0: never refit, so trust stays 1 everywhere.
        let inert = train_rl(&quick_spec(&env, true, 0, 2048)).unwrap();
        let baseline = train_rl(&quick_spec(&env, false, 0, 2048)).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&inert.final_policy), bits(&baseline.final_policy));
        assert_eq!(bits(&inert.final_value), bits(&baseline.final_value));
        assert_eq!(inert.metrics, baseline.metrics);
    }

    #[test]
    fn monitoring_is_read_only_with_active_refits_under_unit_trust() {
        // With no corruption the unimodal gate holds trust at 1, so an
        // SD-enabled run with refits must still match the baseline bitwise.
        let env = ChainEnv::new(5).unwrap();
        let sd = train_rl(&quick_spec(&env, true, 256, 2048)).unwrap();
        let baseline = train_rl(&quick_spec(&env, false, 0, 2048)).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        if sd.trust_events.iter().all(|e| e.w_raw == 1.0) {
            assert_eq!(bits(&sd.final_policy), bits(&baseline.final_policy));
        }
    }

    #[test]
    fn short_run_produces_expected_record_shapes() {
        let env = ChainEnv::new(5).unwrap();
        let res = train_rl(&quick_spec(&env, true, 500, 2048)).unwrap();
        assert!(!res.metrics.is_empty());
        assert_eq!(res.metrics[0].step, 0);
        assert_eq!(res.metrics.last().unwrap().step, 2048);
        assert_eq!(res.mean_trust_by_step.len(), 2048);
        assert!(res.summary.run_mean_trust >= 0.0 && res.summary.run_mean_trust <= 1.0);
        // No corruption anywhere: every experience is reliable.
        assert!(!res.summary.saw_unreliable);
        assert!(res.summary.trust_rho_auroc.is_none());
    }

    #[test]
    fn reruns_are_bit_identical() {
        let env = ChainEnv::new(5).unwrap();
        let a = train_rl(&quick_spec(&env, true, 500, 1024)).unwrap();
        let b = train_rl(&quick_spec(&env, true, 500, 1024)).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.final_policy), bits(&b.final_policy));
        assert_eq!(a.metrics, b.metrics);
    }
}
