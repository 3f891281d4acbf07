//! Clean/corrupt/recover phase boundaries as fractions of total steps.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Clean,
    Corrupt,
    Recover,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Clean => "clean",
            Phase::Corrupt => "corrupt",
            Phase::Recover => "recover",
        }
    }
}

/// Three-phase training protocol. The default (0.3, 0.7) splits a run into
/// clean (first 30%), corruption (30%-70%), and recovery (last 30%).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    pub total_steps: u64,
    pub clean_end: f64,
    pub corrupt_end: f64,
}

impl PhaseSchedule {
    pub fn new(total_steps: u64, clean_end: f64, corrupt_end: f64) -> Result<Self> {
        if total_steps == 0 {
            return Err(Error::config("total_steps must be positive"));
        }
        if !(clean_end > 0.0 && clean_end < corrupt_end && corrupt_end <= 1.0) {
            return Err(Error::config(format!(
                "phase fractions must satisfy 0 < clean_end < corrupt_end <= 1, got ({clean_end}, {corrupt_end})"
            )));
        }
        Ok(PhaseSchedule {
            total_steps,
            clean_end,
            corrupt_end,
        })
    }

    pub fn with_default_phases(total_steps: u64) -> Self {
        PhaseSchedule {
            total_steps,
            clean_end: 0.3,
            corrupt_end: 0.7,
        }
    }
}

/// Phase of a given global step. Boundary convention: a phase owns steps with
/// `step/total < upper` (strict upper bound), so the first corrupt step is the
/// smallest step with `step/total >= clean_end`.
pub fn phase_of(step: u64, schedule: &PhaseSchedule) -> Result<Phase> {
    if step >= schedule.total_steps {
        return Err(Error::range(format!(
            "step {step} out of range for total_steps {}",
            schedule.total_steps
        )));
    }
    let frac = step as f64 / schedule.total_steps as f64;
    Ok(if frac < schedule.clean_end {
        Phase::Clean
    } else if frac < schedule.corrupt_end {
        Phase::Corrupt
    } else {
        Phase::Recover
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_schedule_examples() {
        let s = PhaseSchedule::with_default_phases(100_000);
        assert_eq!(phase_of(0, &s).unwrap(), Phase::Clean);
        assert_eq!(phase_of(50_000, &s).unwrap(), Phase::Corrupt);
        // Boundary forced by the strict `<` convention.
        assert_eq!(phase_of(30_000, &s).unwrap(), Phase::Corrupt);
        assert_eq!(phase_of(29_999, &s).unwrap(), Phase::Clean);
        assert_eq!(phase_of(70_000, &s).unwrap(), Phase::Recover);
        assert_eq!(phase_of(99_999, &s).unwrap(), Phase::Recover);
    }

    #[test]
    fn out_of_range_step_rejected() {
        let s = PhaseSchedule::with_default_phases(100);
        assert!(phase_of(100, &s).is_err());
    }

    #[test]
    fn invalid_fractions_rejected() {
        assert!(PhaseSchedule::new(100, 0.0, 0.7).is_err());
        assert!(PhaseSchedule::new(100, 0.7, 0.3).is_err());
        assert!(PhaseSchedule::new(100, 0.3, 1.1).is_err());
        assert!(PhaseSchedule::new(0, 0.3, 0.7).is_err());
    }

    proptest! {
        // Phases occur in order Clean -> Corrupt -> Recover with no interleaving.
        #[test]
        fn phases_are_monotone(total in 10u64..10_000, a in 0.05f64..0.5, b in 0.55f64..1.0) {
            let s = PhaseSchedule::new(total, a, b).unwrap();
            let mut last = Phase::Clean;
            for step in 0..total {
                let p = phase_of(step, &s).unwrap();
                let ord = |p: Phase| match p {
                    Phase::Clean => 0,
                    Phase::Corrupt => 1,
                    Phase::Recover => 2,
                };
                prop_assert!(ord(p) >= ord(last));
                last = p;
            }
        }
    }
}
