use rand::Rng;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::Result;

/// Glorot/Xavier uniform bound.
pub(crate) fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Fully connected layer `x·W + b` with `W [in×out]` and `b [1×out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: Tensor::uniform(&[inputs, outputs], glorot_limit(inputs, outputs), rng),
            bias: Tensor::zeros(&[1, outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub(crate) fn params(&self) -> Vec<(&'static str, &Tensor)> {
        vec![("weight", &self.weight), ("bias", &self.bias)]
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }

    /// `vars` are the tape leaves for `[weight, bias]`.
    pub(crate) fn forward(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        let y = tape.matmul(x, vars[0])?;
        tape.add_bias(y, vars[1])
    }
}
