//! Desk-scale environments with known optimal policies, plus the corruption
//! protocols applied between the true reward and what the learner observes.

mod chain;
mod corruption;
mod grid;
mod oracle;

pub use chain::ChainEnv;
pub use corruption::{apply_corruption, corruption_rate_estimate, CorruptionMode};
pub use grid::GridWorld;
pub use oracle::optimal_return;

use crate::error::Result;

/// Deterministic transition produced by an environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub next_state: usize,
    pub reward_true: f64,
    pub done: bool,
}

/// Enumerable episodic environment. Transitions are deterministic; episodes
/// end on reaching the goal or on hitting `horizon` steps (enforced by the
/// caller's episode counter).
pub trait Env {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn start_state(&self) -> usize;
    fn horizon(&self) -> u32;
    fn step(&self, state: usize, action: usize) -> Result<Transition>;
}
