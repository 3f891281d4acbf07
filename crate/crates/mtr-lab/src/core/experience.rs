//! One interaction record plus the hidden ground truth used only by
//! evaluation code.

/// A single environment interaction. `reward_true` and `reliability` are the
/// evaluation-only ground truth: learner-facing code receives a [`LearnerView`]
/// which does not expose them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experience {
    pub state: usize,
    pub action: usize,
    pub reward_observed: f64,
    pub next_state: usize,
    pub done: bool,
    /// Global environment step at which this experience was collected.
    pub step: u64,
    reward_true: f64,
    reliability: bool,
}

impl Experience {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        state: usize,
        action: usize,
        reward_observed: f64,
        next_state: usize,
        done: bool,
        step: u64,
        reward_true: f64,
        reliability: bool,
    ) -> Self {
        // reliability = 1 implies the observed reward is the true reward,
        // bit for bit.
        debug_assert!(!reliability || reward_observed.to_bits() == reward_true.to_bits());
        Experience {
            state,
            action,
            reward_observed,
            next_state,
            done,
            step,
            reward_true,
            reliability,
        }
    }

    /// Learner-facing view: everything except the hidden reliability fields.
    pub fn learner_view(&self) -> LearnerView<'_> {
        LearnerView(self)
    }

    /// Evaluation-only: the uncorrupted reward.
    pub fn eval_reward_true(&self) -> f64 {
        self.reward_true
    }

    /// Evaluation-only: the latent reliability flag (true = faithful).
    pub fn eval_reliability(&self) -> bool {
        self.reliability
    }
}

/// What the learner, monitor, trust estimator, and regulator are allowed to
/// read. Deliberately omits `reward_true` and `reliability`.
#[derive(Debug, Clone, Copy)]
pub struct LearnerView<'a>(&'a Experience);

impl LearnerView<'_> {
    pub fn state(&self) -> usize {
        self.0.state
    }
    pub fn action(&self) -> usize {
        self.0.action
    }
    pub fn reward_observed(&self) -> f64 {
        self.0.reward_observed
    }
    pub fn next_state(&self) -> usize {
        self.0.next_state
    }
    pub fn done(&self) -> bool {
        self.0.done
    }
    pub fn step(&self) -> u64 {
        self.0.step
    }
}
