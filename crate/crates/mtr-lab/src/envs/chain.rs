//! Linear chain: start at 0, goal at the far end, actions Left/Right.
//! Optimal policy is "Right everywhere".

use super::{Env, Transition};
use crate::error::{Error, Result};

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

#[derive(Debug, Clone)]
pub struct ChainEnv {
    pub n_states: usize,
    pub goal_state: usize,
    pub step_penalty: f64,
    pub goal_reward: f64,
    pub horizon: u32,
}

impl ChainEnv {
    pub fn new(n_states: usize) -> Result<Self> {
        if n_states < 3 {
            return Err(Error::config("chain needs at least 3 states"));
        }
        Ok(ChainEnv {
            n_states,
            goal_state: n_states - 1,
            step_penalty: -0.01,
            goal_reward: 1.0,
            horizon: 4 * n_states as u32,
        })
    }

    /// Closed-form optimal return from the start state: one goal reward plus
    /// a step penalty for every non-goal transition on the shortest path.
    pub fn optimal_return_closed_form(&self) -> f64 {
        self.goal_reward + (self.n_states as f64 - 2.0) * self.step_penalty
    }
}

impl Env for ChainEnv {
    fn n_states(&self) -> usize {
        self.n_states
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn start_state(&self) -> usize {
        0
    }

    fn horizon(&self) -> u32 {
        self.horizon
    }

    fn step(&self, state: usize, action: usize) -> Result<Transition> {
        if state >= self.n_states || state == self.goal_state {
            return Err(Error::range(format!("invalid chain state {state}")));
        }
        if action > 1 {
            return Err(Error::range(format!("invalid chain action {action}")));
        }
        let next_state = match action {
            LEFT => state.saturating_sub(1),
            _ => (state + 1).min(self.n_states - 1),
        };
        let done = next_state == self.goal_state;
        let reward_true = if done { self.goal_reward } else { self.step_penalty };
        Ok(Transition {
            next_state,
            reward_true,
            done,
        })
    }
}
