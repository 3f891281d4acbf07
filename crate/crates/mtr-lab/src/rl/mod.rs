//! PPO-style learner plus the trust regulator: clipped-surrogate policy
//! optimization with GAE where per-sample trust weights multiply the policy
//! loss only.

mod buffer;
mod ppo;
mod train;

pub use buffer::{gae, RolloutBuffer};
pub use ppo::{
    one_hot_batch, policy_distributions, ppo_update, trust_weighted_policy_loss, PpoConfig,
    PpoDiagnostics,
};
pub use train::{
    eval_return_clean, train_rl, DescriptorRow, RlMetricsRecord, RlRunResult, RlRunSpec,
    RlRunSummary, SdConfig, TrustEvent,
};
