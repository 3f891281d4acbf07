//! Minimal dense numeric stack: matrices, MLPs with manual backpropagation,
//! softmax/entropy, and Adam. All computation is in f64.

mod matrix;
mod mlp;
mod ops;
mod optim;

pub use matrix::Matrix;
pub use mlp::{mlp_backward, mlp_forward, Activation, MlpCache, MlpGrads, MlpParams};
pub use ops::{entropy, linear_decay, softmax};
pub use optim::{adam_step, AdamState};
