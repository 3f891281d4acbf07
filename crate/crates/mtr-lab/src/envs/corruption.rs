//! Corruption protocols between the environment's true reward and the
//! learner's observed reward.
//!
//! The returned reliability flag is 0 exactly when the observed reward was
//! replaced or inverted (systematic corruption). Unbiased Gaussian noise is
//! labeled reliable: it makes learning harder without lying about the task.

use crate::core::{phase_of, Phase, PhaseSchedule, SeededRng};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CorruptionMode {
    /// No corruption at any step.
    None,
    /// Replace the reward with Uniform[lo, hi) with probability `p`, during
    /// the Corrupt phase only.
    UniformReplace { p: f64, lo: f64, hi: f64 },
    /// Add zero-mean Gaussian noise at every step. Unbiased, so reliability
    /// stays 1.
    GaussianNoise { sigma: f64 },
    /// Systematic sign inversion while `step/total < frac`.
    EarlyInvert { frac: f64 },
    /// UniformReplace triggered only when `state >= threshold_state`, during
    /// the Corrupt phase.
    StateDependent {
        threshold_state: usize,
        p: f64,
        lo: f64,
        hi: f64,
    },
}

impl CorruptionMode {
    pub fn validate(&self) -> Result<()> {
        let check_p = |p: f64| {
            if !(0.0..=1.0).contains(&p) {
                Err(Error::config(format!("probability out of range: {p}")))
            } else {
                Ok(())
            }
        };
        match *self {
            CorruptionMode::None => Ok(()),
            CorruptionMode::UniformReplace { p, lo, hi } => {
                check_p(p)?;
                if lo >= hi {
                    return Err(Error::config(format!("need lo < hi, got [{lo}, {hi}]")));
                }
                Ok(())
            }
            CorruptionMode::GaussianNoise { sigma } => {
                if sigma < 0.0 {
                    return Err(Error::config(format!("sigma must be >= 0, got {sigma}")));
                }
                Ok(())
            }
            CorruptionMode::EarlyInvert { frac } => {
                if !(frac > 0.0 && frac < 1.0) {
                    return Err(Error::config(format!("frac must be in (0,1), got {frac}")));
                }
                Ok(())
            }
            CorruptionMode::StateDependent { p, lo, hi, .. } => {
                check_p(p)?;
                if lo >= hi {
                    return Err(Error::config(format!("need lo < hi, got [{lo}, {hi}]")));
                }
                Ok(())
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            CorruptionMode::None => "none",
            CorruptionMode::UniformReplace { .. } => "uniform_replace",
            CorruptionMode::GaussianNoise { .. } => "gaussian_noise",
            CorruptionMode::EarlyInvert { .. } => "early_invert",
            CorruptionMode::StateDependent { .. } => "state_dependent",
        }
    }
}

/// Applies `mode` to a true reward. Returns (observed reward, reliability),
/// reliability true = faithful. Outside its active phase/region every mode is
/// the identity and reports reliable.
pub fn apply_corruption(
    reward_true: f64,
    state: usize,
    step: u64,
    schedule: &PhaseSchedule,
    mode: &CorruptionMode,
    rng: &mut SeededRng,
) -> Result<(f64, bool)> {
    let phase = phase_of(step, schedule)?;
    Ok(match *mode {
        CorruptionMode::None => (reward_true, true),
        CorruptionMode::UniformReplace { p, lo, hi } => {
            if phase == Phase::Corrupt && rng.uniform() < p {
                (rng.uniform_range(lo, hi), false)
            } else {
                (reward_true, true)
            }
        }
        CorruptionMode::GaussianNoise { sigma } => (reward_true + rng.normal(0.0, sigma), true),
        CorruptionMode::EarlyInvert { frac } => {
            if (step as f64 / schedule.total_steps as f64) < frac {
                (-reward_true, false)
            } else {
                (reward_true, true)
            }
        }
        CorruptionMode::StateDependent {
            threshold_state,
            p,
            lo,
            hi,
        } => {
            if phase == Phase::Corrupt && state >= threshold_state && rng.uniform() < p {
                (rng.uniform_range(lo, hi), false)
            } else {
                (reward_true, true)
            }
        }
    })
}

/// Monte-Carlo self-check: fraction of unreliable draws over steps sampled
/// uniformly from the Corrupt phase. For `StateDependent`, states are drawn
/// uniformly from [0, 2*threshold), so about half the samples land in the
/// triggered region.
pub fn corruption_rate_estimate(
    mode: &CorruptionMode,
    schedule: &PhaseSchedule,
    n_samples: usize,
    rng: &mut SeededRng,
) -> Result<f64> {
    if n_samples < 1000 {
        return Err(Error::insufficient("need at least 1000 samples"));
    }
    let total = schedule.total_steps as f64;
    let lo_step = (schedule.clean_end * total).ceil() as u64;
    let hi_step = ((schedule.corrupt_end * total).ceil() as u64).min(schedule.total_steps);
    if lo_step >= hi_step {
        return Err(Error::config("empty corrupt phase".to_string()));
    }
    let mut unreliable = 0usize;
    for _ in 0..n_samples {
        let step = rng.gen_range(lo_step..hi_step);
        let state = match *mode {
            CorruptionMode::StateDependent { threshold_state, .. } => {
                rng.gen_range(0..(2 * threshold_state.max(1)))
            }
            _ => 0,
        };
        let (_, reliable) = apply_corruption(1.0, state, step, schedule, mode, rng)?;
        if !reliable {
            unreliable += 1;
        }
    }
    Ok(unreliable as f64 / n_samples as f64)
}
