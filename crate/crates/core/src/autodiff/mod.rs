//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] is rebuilt for every forward pass. Each operation appends a
//! node holding its output value together with whatever it needs to push
//! gradients back to its inputs; [`Tape::backward`] then walks the nodes in
//! reverse exactly once.

mod gradcheck;
mod kernels;
mod tape;
mod tensor;

pub use gradcheck::gradient_check;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
