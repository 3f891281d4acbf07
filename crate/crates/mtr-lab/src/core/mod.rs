//! Shared domain types: phase schedule, deterministic seeded randomness, and
//! the experience record with its evaluation-only fields.

mod experience;
mod phase;
mod rng;

pub use experience::{Experience, LearnerView};
pub use phase::{phase_of, Phase, PhaseSchedule};
pub use rng::{derive_rng, SeededRng};
