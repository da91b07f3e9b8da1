use rand::Rng;

use super::layers::glorot_limit;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::text::EncodedText;

/// Embedding table followed by a single-layer LSTM; the feature of a
/// sequence is its hidden state after the last non-pad token.
///
/// Gate blocks in `w_input`, `w_hidden` and `bias` are ordered input,
/// forget, cell, output, each `hidden` columns wide.
#[derive(Clone, Debug, PartialEq)]
pub struct TextEncoder {
    pub embedding: Tensor,
    pub w_input: Tensor,
    pub w_hidden: Tensor,
    pub bias: Tensor,
}

impl TextEncoder {
    pub fn new(vocab_size: usize, embed_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let embedding = Tensor::uniform(
            &[vocab_size, embed_dim],
            glorot_limit(vocab_size, embed_dim),
            rng,
        );
        let w_input = Tensor::uniform(
            &[embed_dim, 4 * hidden],
            glorot_limit(embed_dim, 4 * hidden),
            rng,
        );
        let w_hidden =
            Tensor::uniform(&[hidden, 4 * hidden], glorot_limit(hidden, 4 * hidden), rng);
        let mut bias = Tensor::zeros(&[1, 4 * hidden]);
        bias.values_mut()[hidden..2 * hidden].fill(1.0);
        Self {
            embedding,
            w_input,
            w_hidden,
            bias,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.shape()[0]
    }

    pub fn embed_dim(&self) -> usize {
        self.embedding.shape()[1]
    }

    pub fn hidden(&self) -> usize {
        self.w_hidden.shape()[0]
    }

    pub(crate) fn params(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("embedding", &self.embedding),
            ("w_input", &self.w_input),
            ("w_hidden", &self.w_hidden),
            ("bias", &self.bias),
        ]
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.embedding,
            &mut self.w_input,
            &mut self.w_hidden,
            &mut self.bias,
        ]
    }

    /// Runs the recurrence and returns `[B×hidden]` final hidden states.
    ///
    /// Rows whose sequence has ended keep their state unchanged, so
    /// trailing PAD never affects the result; an empty sequence yields
    /// zeros.
    pub(crate) fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        batch: &[&EncodedText],
    ) -> Result<Var> {
        let [embedding, w_input, w_hidden, bias] = vars[..] else {
            return Err(Error::Contract(
                "text encoder expects 4 bound parameters".into(),
            ));
        };
        if batch.is_empty() {
            return Err(Error::Contract("empty text batch".into()));
        }
        let vocab = self.vocab_size();
        for (row, e) in batch.iter().enumerate() {
            if let Some(&index) = e.ids.iter().find(|&&id| id >= vocab) {
                return Err(Error::Label {
                    index,
                    position: row,
                    bound: vocab,
                });
            }
            if e.true_length > e.ids.len() {
                return Err(Error::Contract(format!(
                    "row {row}: true_length exceeds ids"
                )));
            }
        }

        let h_size = self.hidden();
        let rows = batch.len();
        let steps = batch.iter().map(|e| e.true_length).max().unwrap_or(0);
        let mut h = tape.constant(Tensor::zeros(&[rows, h_size]));
        let mut c = tape.constant(Tensor::zeros(&[rows, h_size]));
        for t in 0..steps {
            let ids: Vec<usize> = batch.iter().map(|e| e.ids[t]).collect();
            let x = tape.embedding(embedding, &ids)?;
            let zx = tape.matmul(x, w_input)?;
            let zh = tape.matmul(h, w_hidden)?;
            let z = tape.add(zx, zh)?;
            let z = tape.add_bias(z, bias)?;

            let i = tape.slice_cols(z, 0, h_size)?;
            let i = tape.sigmoid(i)?;
            let f = tape.slice_cols(z, h_size, h_size)?;
            let f = tape.sigmoid(f)?;
            let g = tape.slice_cols(z, 2 * h_size, h_size)?;
            let g = tape.tanh(g)?;
            let o = tape.slice_cols(z, 3 * h_size, h_size)?;
            let o = tape.sigmoid(o)?;

            let keep = tape.mul(f, c)?;
            let write = tape.mul(i, g)?;
            let c_next = tape.add(keep, write)?;
            let c_act = tape.tanh(c_next)?;
            let h_next = tape.mul(o, c_act)?;

            let active: Vec<bool> = batch.iter().map(|e| t < e.true_length).collect();
            if active.iter().all(|&a| a) {
                c = c_next;
                h = h_next;
            } else {
                c = tape.where_rows(&active, c_next, c)?;
                h = tape.where_rows(&active, h_next, h)?;
            }
        }
        Ok(h)
    }
}
