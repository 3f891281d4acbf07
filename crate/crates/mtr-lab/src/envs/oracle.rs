//! Finite-horizon value iteration over an enumerable environment. Serves as
//! the independent oracle for "what return should a correct policy achieve".

use super::Env;
use crate::error::Result;

/// Undiscounted optimal return from `start`, communicated over the
/// environment's own horizon. Dynamic program over remaining steps:
/// `V_h(s) = max_a [ r(s,a) + V_{h-1}(s') ]`, terminal states worth 0.
pub fn optimal_return(env: &dyn Env, start: usize) -> Result<f64> {
    let n = env.n_states();
    let horizon = env.horizon() as usize;
    // Terminal (goal) states are the ones `step` refuses to leave; mark them.
    let mut terminal = vec![false; n];
    for s in 0..n {
        if env.step(s, 0).is_err() {
            terminal[s] = true;
        }
    }
    let mut v_prev = vec![0.0_f64; n];
    let mut v_cur = vec![0.0_f64; n];
    for _ in 0..horizon {
        for s in 0..n {
            if terminal[s] {
                v_cur[s] = 0.0;
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            for a in 0..env.n_actions() {
                let t = env.step(s, a)?;
                let value = t.reward_true + if t.done { 0.0 } else { v_prev[t.next_state] };
                if value > best {
                    best = value;
                }
            }
            v_cur[s] = best;
        }
        std::mem::swap(&mut v_prev, &mut v_cur);
    }
    Ok(v_prev[start])
}
