//! Softmax, entropy, and the learning-rate schedule.

use crate::error::{Error, Result};

/// Numerically stable softmax (max-subtraction). Entries are strictly
/// positive and sum to 1 within 1e-12.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    debug_assert!(!logits.is_empty());
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Shannon entropy in nats with the 0*ln(0) := 0 convention.
pub fn entropy(probs: &[f64]) -> Result<f64> {
    let mut h = 0.0;
    let mut sum = 0.0;
    for &p in probs {
        if p < 0.0 {
            return Err(Error::domain(format!("negative probability {p}")));
        }
        sum += p;
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(h)
}

/// `lr0 * (1 - step/total)`, floored at 0.
pub fn linear_decay(lr0: f64, step: u64, total: u64) -> f64 {
    if total == 0 {
        return lr0;
    }
    (lr0 * (1.0 - step as f64 / total as f64)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_symmetry() {
        let p = softmax(&[0.0, 0.0]);
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert!((p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn softmax_large_logits_do_not_overflow() {
        let p = softmax(&[1000.0, 0.0]);
        assert!(p[0] > 1.0 - 1e-12 && p[0].is_finite());
        assert!(p[1] < 1e-12);
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_analytic_two_to_one() {
        let p = softmax(&[2f64.ln(), 0.0]);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_known_values() {
        let uniform10 = vec![0.1; 10];
        assert!((entropy(&uniform10).unwrap() - 10f64.ln()).abs() < 1e-12);

        let onehot = vec![0.0, 1.0, 0.0];
        assert_eq!(entropy(&onehot).unwrap(), 0.0);

        let mut half = vec![0.0; 10];
        half[0] = 0.5;
        half[1] = 0.5;
        assert!((entropy(&half).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_rejects_negative() {
        assert!(entropy(&[-0.1, 1.1]).is_err());
    }

    #[test]
    fn decay_schedule() {
        assert_eq!(linear_decay(3e-4, 0, 100), 3e-4);
        assert_eq!(linear_decay(0.5, 100, 100), 0.0);
        assert!((linear_decay(0.5, 50, 100) - 0.25).abs() < 1e-15);
    }

    proptest! {
        // entropy(softmax(x + c)) == entropy(softmax(x)) for any constant shift.
        #[test]
        fn entropy_shift_invariance(
            logits in proptest::collection::vec(-20.0f64..20.0, 2..8),
            c in -50.0f64..50.0,
        ) {
            let h1 = entropy(&softmax(&logits)).unwrap();
            let shifted: Vec<f64> = logits.iter().map(|v| v + c).collect();
            let h2 = entropy(&softmax(&shifted)).unwrap();
            prop_assert!((h1 - h2).abs() < 1e-10);
        }

        #[test]
        fn softmax_sums_to_one(logits in proptest::collection::vec(-30.0f64..30.0, 1..10)) {
            let p = softmax(&logits);
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&v| v > 0.0));
        }
    }
}
