//! Adam optimizer over MLP-shaped parameter sets.

use super::mlp::{MlpGrads, MlpParams};
use crate::error::{Error, Result};

/// First/second-moment accumulators plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: MlpGrads,
    pub v: MlpGrads,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &MlpParams) -> Self {
        AdamState {
            m: params.grads_like(),
            v: params.grads_like(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    params: &mut MlpParams,
    grads: &MlpGrads,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if grads.weights.len() != params.weights.len() {
        return Err(Error::shape("grads do not match params".to_string()));
    }
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - state.beta1.powf(t);
    let bc2 = 1.0 - state.beta2.powf(t);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);

    for l in 0..params.weights.len() {
        if grads.weights[l].rows() != params.weights[l].rows()
            || grads.weights[l].cols() != params.weights[l].cols()
            || grads.biases[l].len() != params.biases[l].len()
        {
            return Err(Error::shape(format!("grad shape mismatch at layer {l}")));
        }
        let w = params.weights[l].data_mut();
        let gw = grads.weights[l].data();
        let mw = state.m.weights[l].data_mut();
        let vw = state.v.weights[l].data_mut();
        for i in 0..w.len() {
            mw[i] = b1 * mw[i] + (1.0 - b1) * gw[i];
            vw[i] = b2 * vw[i] + (1.0 - b2) * gw[i] * gw[i];
            let m_hat = mw[i] / bc1;
            let v_hat = vw[i] / bc2;
            w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        let b = &mut params.biases[l];
        let gb = &grads.biases[l];
        let mb = &mut state.m.biases[l];
        let vb = &mut state.v.biases[l];
        for i in 0..b.len() {
            mb[i] = b1 * mb[i] + (1.0 - b1) * gb[i];
            vb[i] = b2 * vb[i] + (1.0 - b2) * gb[i] * gb[i];
            let m_hat = mb[i] / bc1;
            let v_hat = vb[i] / bc2;
            b[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
