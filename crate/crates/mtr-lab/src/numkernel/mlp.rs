//! Multilayer perceptron with manual reverse-mode gradients.
//!
//! No autodiff graph: the artifact has exactly three loss heads (policy
//! surrogate, value MSE, cross-entropy), so each caller computes the loss
//! gradient w.r.t. the output logits and hands it to [`mlp_backward`].

use super::matrix::Matrix;
use crate::core::SeededRng;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

/// Weights and biases for a stack of dense layers. Hidden layers apply the
/// activation; the final layer is linear (logits / value).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    sizes: Vec<usize>,
    pub activation: Activation,
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

/// Gradients (or any accumulator) with the same shapes as [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpParams {
    /// Glorot-uniform init: weights ~ U(+-sqrt(6/(fan_in+fan_out))), biases 0.
    pub fn init(sizes: &[usize], activation: Activation, rng: &mut SeededRng) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::config("MLP needs at least input and output sizes"));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::config("MLP layer sizes must be positive"));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.uniform_range(-limit, limit))
                .collect();
            weights.push(Matrix::from_vec(fan_in, fan_out, data)?);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(MlpParams {
            sizes: sizes.to_vec(),
            activation,
            weights,
            biases,
        })
    }

    pub fn zeros(sizes: &[usize], activation: Activation) -> Result<Self> {
        let mut rng = SeededRng::new(0, "zeros");
        let mut p = Self::init(sizes, activation, &mut rng)?;
        for w in &mut p.weights {
            w.map_in_place(|_| 0.0);
        }
        Ok(p)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn in_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn grads_like(&self) -> MlpGrads {
        MlpGrads {
            weights: self
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Flattened view of all parameters, used by tests and bit-level
    /// trajectory comparisons.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }
}

/// Activations cached by the forward pass; `layer_inputs[l]` is the input to
/// layer `l` (post-activation of the previous layer), `layer_inputs[0]` is the
/// network input.
#[derive(Debug, Clone)]
pub struct MlpCache {
    layer_inputs: Vec<Matrix>,
}

pub fn mlp_forward(params: &MlpParams, input: &Matrix) -> Result<(Matrix, MlpCache)> {
    if input.cols() != params.in_dim() {
        return Err(Error::shape(format!(
            "input cols {} vs in dim {}",
            input.cols(),
            params.in_dim()
        )));
    }
    let n_layers = params.weights.len();
    let mut layer_inputs = Vec::with_capacity(n_layers);
    let mut a = input.clone();
    for l in 0..n_layers {
        layer_inputs.push(a.clone());
        let mut z = a.matmul(&params.weights[l])?;
        z.add_row_broadcast(&params.biases[l])?;
        if l + 1 < n_layers {
            match params.activation {
                Activation::Tanh => z.map_in_place(f64::tanh),
                Activation::Relu => z.map_in_place(|v| if v > 0.0 { v } else { 0.0 }),
            }
        }
        a = z;
    }
    Ok((a, MlpCache { layer_inputs }))
}

/// Exact reverse-mode gradients of the forward map given `dL/d logits`.
pub fn mlp_backward(params: &MlpParams, cache: &MlpCache, grad_output: &Matrix) -> Result<MlpGrads> {
    let n_layers = params.weights.len();
    if cache.layer_inputs.len() != n_layers {
        return Err(Error::shape("cache does not match params".to_string()));
    }
    if grad_output.cols() != params.out_dim() {
        return Err(Error::shape(format!(
            "grad_output cols {} vs out dim {}",
            grad_output.cols(),
            params.out_dim()
        )));
    }
    let mut grads = params.grads_like();
    let mut dz = grad_output.clone();
    for l in (0..n_layers).rev() {
        let a_in = &cache.layer_inputs[l];
        grads.weights[l] = a_in.matmul_tn(&dz)?;
        grads.biases[l] = dz.col_sums();
        if l > 0 {
            let mut da = dz.matmul_nt(&params.weights[l])?;
            // a_in is the post-activation output of layer l-1.
            let act = params.activation;
            for (v, &a) in da.data_mut().iter_mut().zip(a_in.data()) {
                *v *= match act {
                    Activation::Tanh => 1.0 - a * a,
                    Activation::Relu => {
                        if a > 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
            }
            dz = da;
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finite(m: &Matrix) -> bool {
        m.data().iter().all(|v| v.is_finite())
    }

    #[test]
    fn zero_params_give_zero_logits() {
        let p = MlpParams::zeros(&[3, 4, 2], Activation::Tanh).unwrap();
        let x = Matrix::from_vec(2, 3, vec![1.0, -1.0, 0.5, 0.0, 2.0, -3.0]).unwrap();
        let (y, _) = mlp_forward(&p, &x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_input_through_tanh_net_stays_zero() {
        // With zero biases, tanh(0) = 0 propagates through every layer.
        let mut rng = SeededRng::new(1, "init");
        let p = MlpParams::init(&[3, 5, 2], Activation::Tanh, &mut rng).unwrap();
        let x = Matrix::zeros(1, 3);
        let (y, _) = mlp_forward(&p, &x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    // Independent straight-line re-implementation used as the forward oracle.
    fn forward_oracle(p: &MlpParams, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let n_layers = p.weights.len();
        for l in 0..n_layers {
            let w = &p.weights[l];
            let mut z = p.biases[l].clone();
            for (j, zj) in z.iter_mut().enumerate() {
                for (i, &ai) in a.iter().enumerate() {
                    *zj += ai * w.get(i, j);
                }
            }
            if l + 1 < n_layers {
                for v in &mut z {
                    *v = match p.activation {
                        Activation::Tanh => v.tanh(),
                        Activation::Relu => v.max(0.0),
                    };
                }
            }
            a = z;
        }
        a
    }

    #[test]
    fn forward_matches_straight_line_oracle() {
        let mut rng = SeededRng::new(42, "fwd-oracle");
        for case in 0..20 {
            let sizes = [
                2 + (case % 3),
                3 + (case % 4),
                2 + (case % 2),
                2 + (case % 3),
            ];
            let act = if case % 2 == 0 { Activation::Tanh } else { Activation::Relu };
            let p = MlpParams::init(&sizes, act, &mut rng).unwrap();
            let x: Vec<f64> = (0..sizes[0]).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
            let xm = Matrix::from_vec(1, sizes[0], x.clone()).unwrap();
            let (y, _) = mlp_forward(&p, &xm).unwrap();
            let oracle = forward_oracle(&p, &x);
            for (a, b) in y.data().iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12, "mismatch {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_grad_output_gives_zero_grads() {
        let mut rng = SeededRng::new(2, "bwd");
        let p = MlpParams::init(&[3, 4, 2], Activation::Tanh, &mut rng).unwrap();
        let x = Matrix::from_vec(2, 3, vec![0.1; 6]).unwrap();
        let (_, cache) = mlp_forward(&p, &x).unwrap();
        let g = mlp_backward(&p, &cache, &Matrix::zeros(2, 2)).unwrap();
        assert!(g.weights.iter().all(|w| w.data().iter().all(|&v| v == 0.0)));
        assert!(g.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn scalar_tanh_net_derivative_at_zero_is_one() {
        // f(w) = tanh(w * x) with x = 1, w = 0: df/dw = tanh'(0) * x = 1.
        // Build a [1,1,1] net where the second layer is identity.
        let mut p = MlpParams::zeros(&[1, 1, 1], Activation::Tanh).unwrap();
        p.weights[1].set(0, 0, 1.0);
        let x = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let (_, cache) = mlp_forward(&p, &x).unwrap();
        let g = mlp_backward(&p, &cache, &Matrix::from_vec(1, 1, vec![1.0]).unwrap()).unwrap();
        assert!((g.weights[0].get(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forward_shape_mismatch_is_error() {
        let p = MlpParams::zeros(&[3, 2], Activation::Relu).unwrap();
        let x = Matrix::zeros(1, 4);
        assert!(mlp_forward(&p, &x).is_err());
    }

    // A relu pre-activation within the finite-difference step of its kink
    // makes the numeric gradient invalid; reject such configurations.
    fn near_relu_kink(p: &MlpParams, x: &Matrix) -> bool {
        if p.activation != Activation::Relu {
            return false;
        }
        let n_layers = p.weights.len();
        let mut a = x.clone();
        for l in 0..n_layers {
            let mut z = a.matmul(&p.weights[l]).unwrap();
            z.add_row_broadcast(&p.biases[l]).unwrap();
            if l + 1 < n_layers {
                if z.data().iter().any(|v| v.abs() < 1e-3) {
                    return true;
                }
                z.map_in_place(|v| v.max(0.0));
            }
            a = z;
        }
        false
    }

    // Central finite differences of L = 0.5 * sum(logits^2) w.r.t. every
    // parameter, compared against mlp_backward with grad_output = logits.
    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = SeededRng::new(7, "fd");
        for case in 0..10 {
            let sizes = [2 + case % 2, 3, 2 + case % 3, 2];
            let act = if case % 2 == 0 { Activation::Tanh } else { Activation::Relu };
            let (p, x) = loop {
                let p = MlpParams::init(&sizes, act, &mut rng).unwrap();
                let x = Matrix::from_vec(
                    2,
                    sizes[0],
                    (0..2 * sizes[0]).map(|_| rng.uniform_range(-1.5, 1.5)).collect(),
                )
                .unwrap();
                if !near_relu_kink(&p, &x) {
                    break (p, x);
                }
            };

            let loss = |p: &MlpParams| -> f64 {
                let (y, _) = mlp_forward(p, &x).unwrap();
                0.5 * y.data().iter().map(|v| v * v).sum::<f64>()
            };

            let (y, cache) = mlp_forward(&p, &x).unwrap();
            let analytic = mlp_backward(&p, &cache, &y).unwrap();

            let h = 1e-5;
            for l in 0..p.weights.len() {
                for idx in 0..p.weights[l].data().len() {
                    let mut plus = p.clone();
                    plus.weights[l].data_mut()[idx] += h;
                    let mut minus = p.clone();
                    minus.weights[l].data_mut()[idx] -= h;
                    let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
                    let a = analytic.weights[l].data()[idx];
                    let rel = (numeric - a).abs() / numeric.abs().max(a.abs()).max(1e-8);
                    assert!(rel < 1e-4, "layer {l} weight {idx}: {numeric} vs {a}");
                }
                for idx in 0..p.biases[l].len() {
                    let mut plus = p.clone();
                    plus.biases[l][idx] += h;
                    let mut minus = p.clone();
                    minus.biases[l][idx] -= h;
                    let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
                    let a = analytic.biases[l][idx];
                    let rel = (numeric - a).abs() / numeric.abs().max(a.abs()).max(1e-8);
                    assert!(rel < 1e-4, "layer {l} bias {idx}: {numeric} vs {a}");
                }
            }
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = SeededRng::new(9, "det");
        let p = MlpParams::init(&[4, 8, 3], Activation::Relu, &mut rng).unwrap();
        let x = Matrix::from_vec(2, 4, (0..8).map(|i| i as f64 * 0.3 - 1.0).collect()).unwrap();
        let (y1, _) = mlp_forward(&p, &x).unwrap();
        let (y2, _) = mlp_forward(&p, &x).unwrap();
        assert_eq!(y1, y2);
        assert!(finite(&y1));
    }
}
