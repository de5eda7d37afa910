use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use super::rng::Rng;
use super::tensor::Tensor2;

/// Affine map `y = W x + b` with `W` stored as `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Tensor2,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Linear {
            weight: Tensor2::zeros(output, input),
            bias: vec![0.0; output],
        }
    }

    /// Weights uniform in ±1/√fan_in, zero bias.
    pub fn init(input: usize, output: usize, rng: &mut Rng) -> Self {
        let mut l = Linear::zeros(input, output);
        uniform_fill(l.weight.as_mut_slice(), input, rng);
        uniform_fill(&mut l.bias, input, rng);
        l
    }

    pub fn input_size(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_size(&self) -> usize {
        self.weight.rows()
    }

    /// Batched forward: rows of `x` are samples.
    pub fn forward(&self, x: &Tensor2) -> Tensor2 {
        let mut y = x.matmul_nt(&self.weight);
        y.add_row_broadcast(&self.bias);
        y
    }

    /// Accumulates parameter gradients into `grads` and returns `∂L/∂x`.
    pub fn backward(&self, x: &Tensor2, dy: &Tensor2, grads: &mut Linear) -> Tensor2 {
        self.accumulate_param_grads(x, dy, grads);
        dy.matmul_nn(&self.weight)
    }

    /// Like [`Linear::backward`] but skips the input gradient.
    pub fn accumulate_param_grads(&self, x: &Tensor2, dy: &Tensor2, grads: &mut Linear) {
        dy.matmul_tn_acc(x, &mut grads.weight);
        dy.sum_rows_into(&mut grads.bias);
    }
}

impl ParamSet for Linear {
    fn slices(&self) -> Vec<&[f64]> {
        vec![self.weight.as_slice(), &self.bias]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.weight.as_mut_slice(), &mut self.bias]
    }
}

pub(crate) fn uniform_fill(t: &mut [f64], fan_in: usize, rng: &mut Rng) {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    for x in t {
        *x = rng.uniform_range(-bound, bound);
    }
}

pub(crate) fn normal_fill(t: &mut [f64], sd: f64, rng: &mut Rng) {
    for x in t {
        *x = sd * rng.standard_normal();
    }
}
