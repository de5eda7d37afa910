//! Dense linear algebra, the GRU cell, softmax utilities and Adam.
//!
//! Every forward operation used by the agents has an analytic backward pass
//! here; there is no general autodiff graph.

pub mod adam;
pub mod gradcheck;
pub mod gru;
pub mod linear;
pub mod params;
pub mod rng;
pub mod softmax;
pub mod tensor;

pub use adam::{adam_update, AdamConfig, AdamState};
pub use gru::{gru_forward, gru_step, gru_step_backward, GruCache, GruParams};
pub use linear::Linear;
pub use params::ParamSet;
pub use rng::{Rng, RNG_ALGORITHM};
pub use softmax::{
    categorical_sample, greedy_argmax, log_softmax, softmax, softmax_cross_entropy,
    softmax_entropy,
};
pub use tensor::Tensor2;
