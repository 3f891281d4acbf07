//! Square gridworld: start at the top-left corner, goal at the bottom-right,
//! four clamped moves. Second environment for cross-environment checks.

use super::{Env, Transition};
use crate::error::{Error, Result};

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;

#[derive(Debug, Clone)]
pub struct GridWorld {
    pub size: usize,
    pub step_penalty: f64,
    pub goal_reward: f64,
    pub horizon: u32,
}

impl GridWorld {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::config("grid needs size >= 2"));
        }
        Ok(GridWorld {
            size,
            step_penalty: -0.01,
            goal_reward: 1.0,
            horizon: 4 * (size * size) as u32,
        })
    }

    fn goal_state(&self) -> usize {
        self.size * self.size - 1
    }

    /// Shortest path takes 2*(size-1) moves; the last one pays the goal reward.
    pub fn optimal_return_closed_form(&self) -> f64 {
        let moves = 2 * (self.size - 1);
        self.goal_reward + (moves as f64 - 1.0) * self.step_penalty
    }
}

impl Env for GridWorld {
    fn n_states(&self) -> usize {
        self.size * self.size
    }

    fn n_actions(&self) -> usize {
        4
    }

    fn start_state(&self) -> usize {
        0
    }

    fn horizon(&self) -> u32 {
        self.horizon
    }

    fn step(&self, state: usize, action: usize) -> Result<Transition> {
        let n = self.size;
        if state >= n * n || state == self.goal_state() {
            return Err(Error::range(format!("invalid grid state {state}")));
        }
        if action > 3 {
            return Err(Error::range(format!("invalid grid action {action}")));
        }
        let (r, c) = (state / n, state % n);
        let (nr, nc) = match action {
            UP => (r.saturating_sub(1), c),
            DOWN => ((r + 1).min(n - 1), c),
            LEFT => (r, c.saturating_sub(1)),
            _ => (r, (c + 1).min(n - 1)),
        };
        let next_state = nr * n + nc;
        let done = next_state == self.goal_state();
        let reward_true = if done { self.goal_reward } else { self.step_penalty };
        Ok(Transition {
            next_state,
            reward_true,
            done,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corner_clamping() {
        let g = GridWorld::new(5).unwrap();
        assert_eq!(g.step(0, UP).unwrap().next_state, 0);
        assert_eq!(g.step(0, LEFT).unwrap().next_state, 0);
        assert_eq!(g.step(0, RIGHT).unwrap().next_state, 1);
        assert_eq!(g.step(0, DOWN).unwrap().next_state, 5);
    }

    #[test]
    fn goal_transition() {
        let g = GridWorld::new(5).unwrap();
        let t = g.step(23, RIGHT).unwrap();
        assert!(t.done);
        assert_eq!(t.reward_true, 1.0);
        assert_eq!(t.next_state, 24);
    }

    #[test]
    fn optimal_return_five_by_five() {
        let g = GridWorld::new(5).unwrap();
        assert!((g.optimal_return_closed_form() - 0.93).abs() < 1e-12);
    }
}
