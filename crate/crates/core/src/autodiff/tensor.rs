use rand::Rng;

use crate::error::{Error, Result};

/// Dense row-major array of `f64` with an optional gradient buffer.
///
/// Parameters live in `Tensor`s owned by the models; a [`Tape`](super::Tape)
/// copies their values in at the start of a forward pass and gradients are
/// accumulated back into [`Tensor::grad`] after the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
}

impl Tensor {
    pub fn new(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Shape {
                op: "tensor",
                shape: shape.to_vec(),
                reason: "dimensions must be positive".into(),
            });
        }
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::Shape {
                op: "tensor",
                shape: shape.to_vec(),
                reason: format!("expected {n} values, got {}", values.len()),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            values,
            grad: None,
            requires_grad: false,
        })
    }

    /// Internal constructor for shapes already known to be consistent.
    pub(crate) fn from_parts(shape: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Self {
            shape,
            values,
            grad: None,
            requires_grad: false,
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self::from_parts(shape.to_vec(), vec![0.0; n])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Contract("ragged rows".into()));
        }
        Self::new(&[rows.len(), cols], rows.concat())
    }

    pub fn scalar(value: f64) -> Self {
        Self::from_parts(vec![1], vec![value])
    }

    /// Uniform initialisation in `[-limit, limit]`.
    pub fn uniform(shape: &[usize], limit: f64, rng: &mut impl Rng) -> Self {
        let n = shape.iter().product();
        let values = (0..n)
            .map(|_| {
                if limit > 0.0 {
                    rng.gen_range(-limit..=limit)
                } else {
                    0.0
                }
            })
            .collect();
        Self::from_parts(shape.to_vec(), values)
    }

    pub fn with_requires_grad(mut self, requires_grad: bool) -> Self {
        self.requires_grad = requires_grad;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn set_requires_grad(&mut self, requires_grad: bool) {
        self.requires_grad = requires_grad;
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        match &mut self.grad {
            Some(g) => g.iter_mut().for_each(|x| *x = 0.0),
            None => self.grad = Some(vec![0.0; self.values.len()]),
        }
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    /// Adds `delta` into the gradient buffer, allocating it on first use.
    pub fn accumulate_grad(&mut self, delta: &[f64]) -> Result<()> {
        if delta.len() != self.values.len() {
            return Err(Error::dim("accumulate_grad", &self.shape, &[delta.len()]));
        }
        let grad = self.grad.get_or_insert_with(|| vec![0.0; delta.len()]);
        for (g, d) in grad.iter_mut().zip(delta) {
            *g += d;
        }
        Ok(())
    }

    /// Mutable access to values and gradient together, for optimizers.
    pub(crate) fn values_and_grad_mut(&mut self) -> (&mut [f64], Option<&[f64]>) {
        (&mut self.values, self.grad.as_deref())
    }

    /// Rows × columns of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::Shape {
                op: "dims2",
                shape: self.shape.clone(),
                reason: "expected a matrix".into(),
            }),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let cols = *self.shape.last().unwrap_or(&1);
        &self.values[i * cols..(i + 1) * cols]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
