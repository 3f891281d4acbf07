//! Rollout storage. Reliability flags and true rewards ride along for
//! evaluation but are not visible to the loss path, which receives only the
//! learner-facing arrays.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards_observed: Vec<f64>,
    pub dones: Vec<bool>,
    pub logps: Vec<f64>,
    pub values: Vec<f64>,
    pub steps: Vec<u64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    reliability: Vec<bool>,
    rewards_true: Vec<f64>,
}

impl RolloutBuffer {
    pub fn with_capacity(cap: usize) -> Self {
        let mut b = RolloutBuffer::default();
        b.states.reserve(cap);
        b.actions.reserve(cap);
        b.rewards_observed.reserve(cap);
        b.dones.reserve(cap);
        b.logps.reserve(cap);
        b.values.reserve(cap);
        b.steps.reserve(cap);
        b.reliability.reserve(cap);
        b.rewards_true.reserve(cap);
        b
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        state: usize,
        action: usize,
        reward_observed: f64,
        done: bool,
        logp: f64,
        value: f64,
        step: u64,
        reward_true: f64,
        reliable: bool,
    ) {
        self.states.push(state);
        self.actions.push(action);
        self.rewards_observed.push(reward_observed);
        self.dones.push(done);
        self.logps.push(logp);
        self.values.push(value);
        self.steps.push(step);
        self.rewards_true.push(reward_true);
        self.reliability.push(reliable);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn clear(&mut self) {
        self.states.clear();
        self.actions.clear();
        self.rewards_observed.clear();
        self.dones.clear();
        self.logps.clear();
        self.values.clear();
        self.steps.clear();
        self.advantages.clear();
        self.returns.clear();
        self.reliability.clear();
        self.rewards_true.clear();
    }

    /// Evaluation-only view of the hidden reliability flags.
    pub fn eval_reliability(&self) -> &[bool] {
        &self.reliability
    }

    pub fn compute_gae(&mut self, gamma: f64, lambda: f64, bootstrap_value: f64) -> Result<()> {
        let (adv, ret) = gae(
            &self.rewards_observed,
            &self.values,
            &self.dones,
            gamma,
            lambda,
            bootstrap_value,
        )?;
        self.advantages = adv;
        self.returns = ret;
        Ok(())
    }
}

/// Generalized advantage estimation:
/// `delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)`,
/// `A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}`, returns = A + V.
/// `bootstrap_value` stands in for V(s_{T}) after the last stored step.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
    bootstrap_value: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let t_len = rewards.len();
    if values.len() != t_len || dones.len() != t_len {
        return Err(Error::shape(format!(
            "gae arrays differ in length: {} / {} / {}",
            t_len,
            values.len(),
            dones.len()
        )));
    }
    let mut advantages = vec![0.0; t_len];
    let mut returns = vec![0.0; t_len];
    let mut next_adv = 0.0;
    for t in (0..t_len).rev() {
        let not_done = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 < t_len { values[t + 1] } else { bootstrap_value };
        let delta = rewards[t] + gamma * next_value * not_done - values[t];
        next_adv = delta + gamma * lambda * not_done * next_adv;
        advantages[t] = next_adv;
        returns[t] = advantages[t] + values[t];
    }
    Ok((advantages, returns))
}
