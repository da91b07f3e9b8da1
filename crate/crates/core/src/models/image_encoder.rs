use rand::Rng;

use super::layers::{glorot_limit, Dense};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// 3×3 convolution (padding 1) + channel bias, followed by ReLU and 2×2
/// max pooling.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvBlock {
    pub kernels: Tensor,
    pub bias: Tensor,
}

/// Stack of [`ConvBlock`]s, flattened into a dense ReLU feature layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageEncoder {
    image_size: usize,
    pub blocks: Vec<ConvBlock>,
    pub dense: Dense,
}

impl ImageEncoder {
    pub fn new(
        image_size: usize,
        channels: &[usize],
        features: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if channels.is_empty() || channels.contains(&0) || features == 0 {
            return Err(Error::Config(
                "image encoder needs positive channel counts and features".into(),
            ));
        }
        let side = image_size >> channels.len();
        if side == 0 {
            return Err(Error::Config(format!(
                "image size {image_size} too small for {} pooling stages",
                channels.len()
            )));
        }
        let mut c_in = 3;
        let blocks = channels
            .iter()
            .map(|&c_out| {
                let block = ConvBlock {
                    kernels: Tensor::uniform(
                        &[c_out, c_in, 3, 3],
                        glorot_limit(c_in * 9, c_out * 9),
                        rng,
                    ),
                    bias: Tensor::zeros(&[c_out]),
                };
                c_in = c_out;
                block
            })
            .collect();
        let flat = c_in * side * side;
        Ok(Self {
            image_size,
            blocks,
            dense: Dense::new(flat, features, rng),
        })
    }

    pub fn image_size(&self) -> usize {
        self.image_size
    }

    pub fn features(&self) -> usize {
        self.dense.outputs()
    }

    pub(crate) fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("conv{i}.kernels"), &b.kernels));
            out.push((format!("conv{i}.bias"), &b.bias));
        }
        for (name, t) in self.dense.params() {
            out.push((format!("dense.{name}"), t));
        }
        out
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.push(&mut b.kernels);
            out.push(&mut b.bias);
        }
        out.extend(self.dense.params_mut());
        out
    }

    /// Maps `[3×S×S]` images to `[B×features]` nonnegative features.
    pub(crate) fn forward(&self, tape: &mut Tape, vars: &[Var], batch: &[&Tensor]) -> Result<Var> {
        if batch.is_empty() {
            return Err(Error::Contract("empty image batch".into()));
        }
        let want = [3, self.image_size, self.image_size];
        let mut values = Vec::with_capacity(batch.len() * want.iter().product::<usize>());
        for img in batch {
            if img.shape() != want {
                return Err(Error::dim("image_encoder", img.shape(), &want));
            }
            values.extend_from_slice(img.values());
        }
        let mut x = tape.constant(Tensor::new(
            &[batch.len(), 3, self.image_size, self.image_size],
            values,
        )?);
        for (i, _) in self.blocks.iter().enumerate() {
            x = tape.conv2d(x, vars[2 * i], 1, 1)?;
            x = tape.add_channel_bias(x, vars[2 * i + 1])?;
            x = tape.relu(x)?;
            x = tape.max_pool2d(x, 2)?;
        }
        let flat = tape.value(x).len() / batch.len();
        let x = tape.reshape(x, &[batch.len(), flat])?;
        let n = self.blocks.len() * 2;
        let y = self.dense.forward(tape, &vars[n..n + 2], x)?;
        tape.relu(y)
    }
}
