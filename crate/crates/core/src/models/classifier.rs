use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::image_encoder::ImageEncoder;
use super::layers::Dense;
use super::text_encoder::TextEncoder;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::text::EncodedText;

/// Which input channels a classifier consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Image,
    Fused,
}

impl Modality {
    pub fn uses_text(self) -> bool {
        matches!(self, Modality::Text | Modality::Fused)
    }

    pub fn uses_image(self) -> bool {
        matches!(self, Modality::Image | Modality::Fused)
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Text => "text",
            Modality::Image => "image",
            Modality::Fused => "fused",
        })
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Modality::Text),
            "image" => Ok(Modality::Image),
            "fused" => Ok(Modality::Fused),
            other => Err(Error::Config(format!(
                "unknown modality {other:?} (expected text, image or fused)"
            ))),
        }
    }
}

/// Architecture hyperparameters. The defaults give the full-size model:
/// 256 LSTM units and 1024 image features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub modality: Modality,
    pub num_classes: usize,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_size: usize,
    pub image_size: usize,
    pub conv_channels: Vec<usize>,
    pub image_features: usize,
    pub freeze_encoders: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            modality: Modality::Fused,
            num_classes: crate::dataset::NUM_GENRES,
            vocab_size: 2,
            embed_dim: 128,
            hidden_size: 256,
            image_size: 64,
            conv_channels: vec![16, 32],
            image_features: 1024,
            freeze_encoders: false,
        }
    }
}

/// One example's inputs; a field may be absent when the classifier's
/// modality does not need it.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub text: Option<EncodedText>,
    pub image: Option<Tensor>,
}

/// Text encoder, image encoder, or both, feeding a dense softmax head.
///
/// With [`Modality::Fused`] the head sees the text features followed by the
/// image features, concatenated per example. Single-modality classifiers
/// are the same model with one encoder absent.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    config: ModelConfig,
    text: Option<TextEncoder>,
    image: Option<ImageEncoder>,
    head: Dense,
}

impl Classifier {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        if config.num_classes == 0 {
            return Err(Error::Config("num_classes must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let text = if config.modality.uses_text() {
            if config.vocab_size < 2 || config.embed_dim == 0 || config.hidden_size == 0 {
                return Err(Error::Config(
                    "text encoder needs vocab_size >= 2 and positive dims".into(),
                ));
            }
            Some(TextEncoder::new(
                config.vocab_size,
                config.embed_dim,
                config.hidden_size,
                &mut rng,
            ))
        } else {
            None
        };
        let image = if config.modality.uses_image() {
            Some(ImageEncoder::new(
                config.image_size,
                &config.conv_channels,
                config.image_features,
                &mut rng,
            )?)
        } else {
            None
        };
        let width = text.as_ref().map_or(0, TextEncoder::hidden)
            + image.as_ref().map_or(0, ImageEncoder::features);
        let head = Dense::new(width, config.num_classes, &mut rng);
        let mut model = Self {
            config,
            text,
            image,
            head,
        };
        model.apply_freeze();
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn modality(&self) -> Modality {
        self.config.modality
    }

    pub fn text_encoder(&self) -> Option<&TextEncoder> {
        self.text.as_ref()
    }

    pub fn image_encoder(&self) -> Option<&ImageEncoder> {
        self.image.as_ref()
    }

    pub fn head(&self) -> &Dense {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut Dense {
        &mut self.head
    }

    /// Width of the concatenated feature vector entering the head.
    pub fn fusion_width(&self) -> usize {
        self.head.inputs()
    }

    pub fn set_freeze_encoders(&mut self, freeze: bool) {
        self.config.freeze_encoders = freeze;
        self.apply_freeze();
    }

    fn apply_freeze(&mut self) {
        let trainable = !self.config.freeze_encoders;
        for p in encoder_params_mut(&mut self.text, &mut self.image) {
            p.set_requires_grad(trainable);
        }
        for p in self.head.params_mut() {
            p.set_requires_grad(true);
        }
    }

    /// Every parameter with a stable dotted name, in binding order.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        if let Some(t) = &self.text {
            out.extend(
                t.params()
                    .into_iter()
                    .map(|(n, p)| (format!("text.{n}"), p)),
            );
        }
        if let Some(i) = &self.image {
            out.extend(
                i.params()
                    .into_iter()
                    .map(|(n, p)| (format!("image.{n}"), p)),
            );
        }
        out.extend(
            self.head
                .params()
                .into_iter()
                .map(|(n, p)| (format!("head.{n}"), p)),
        );
        out
    }

    /// Mutable parameters in the same order as [`Classifier::named_params`].
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = encoder_params_mut(&mut self.text, &mut self.image);
        out.extend(self.head.params_mut());
        out
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, p)| p.len()).sum()
    }

    /// Parameters the optimizer should update, with their names.
    pub fn trainable_params_mut(&mut self) -> (Vec<String>, Vec<&mut Tensor>) {
        let names: Vec<String> = self
            .named_params()
            .into_iter()
            .filter(|(_, p)| p.requires_grad())
            .map(|(n, _)| n)
            .collect();
        let params = self
            .params_mut()
            .into_iter()
            .filter(|p| p.requires_grad())
            .collect();
        (names, params)
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Overwrites the parameter `name` with `value` (same shape required).
    pub fn set_param(&mut self, name: &str, value: &Tensor) -> Result<()> {
        let idx = self
            .named_params()
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::Compatibility(format!("model has no parameter {name:?}")))?;
        let mut params = self.params_mut();
        let target = &mut params[idx];
        if target.shape() != value.shape() {
            return Err(Error::Compatibility(format!(
                "parameter {name}: expected shape {:?}, got {:?}",
                target.shape(),
                value.shape()
            )));
        }
        target.values_mut().copy_from_slice(value.values());
        Ok(())
    }

    /// Records every parameter on `tape`, in [`Classifier::named_params`]
    /// order.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.named_params()
            .into_iter()
            .map(|(_, p)| tape.leaf(p))
            .collect()
    }

    fn text_param_count(&self) -> usize {
        self.text.as_ref().map_or(0, |t| t.params().len())
    }

    fn image_param_count(&self) -> usize {
        self.image.as_ref().map_or(0, |i| i.params().len())
    }

    /// `[B×hidden]` text features for the bound parameters.
    pub fn text_features(
        &self,
        tape: &mut Tape,
        bound: &[Var],
        batch: &[&EncodedText],
    ) -> Result<Var> {
        let enc = self.text.as_ref().ok_or_else(|| {
            Error::Contract(format!("{} model has no text encoder", self.modality()))
        })?;
        enc.forward(tape, &bound[..self.text_param_count()], batch)
    }

    /// `[B×image_features]` image features for the bound parameters.
    pub fn image_features(&self, tape: &mut Tape, bound: &[Var], batch: &[&Tensor]) -> Result<Var> {
        let enc = self.image.as_ref().ok_or_else(|| {
            Error::Contract(format!("{} model has no image encoder", self.modality()))
        })?;
        let start = self.text_param_count();
        enc.forward(tape, &bound[start..start + self.image_param_count()], batch)
    }

    /// Unnormalised class scores `[B×num_classes]`.
    ///
    /// Inputs for the modalities the model does not use are ignored. For a
    /// fused model both batches are required and must have equal length.
    pub fn logits(
        &self,
        tape: &mut Tape,
        bound: &[Var],
        texts: Option<&[&EncodedText]>,
        images: Option<&[&Tensor]>,
    ) -> Result<Var> {
        let modality = self.modality();
        let text = match (modality.uses_text(), texts) {
            (true, Some(batch)) => Some(self.text_features(tape, bound, batch)?),
            (true, None) => {
                return Err(Error::Contract(format!(
                    "{modality} model needs text input"
                )))
            }
            (false, _) => None,
        };
        let image = match (modality.uses_image(), images) {
            (true, Some(batch)) => {
                if let (Some(t), true) = (texts, modality.uses_text()) {
                    if t.len() != batch.len() {
                        return Err(Error::Contract(format!(
                            "batch size mismatch: {} texts, {} images",
                            t.len(),
                            batch.len()
                        )));
                    }
                }
                Some(self.image_features(tape, bound, batch)?)
            }
            (true, None) => {
                return Err(Error::Contract(format!(
                    "{modality} model needs image input"
                )))
            }
            (false, _) => None,
        };
        let features = match (text, image) {
            (Some(t), Some(i)) => tape.concat_rows(t, i)?,
            (Some(f), None) | (None, Some(f)) => f,
            (None, None) => unreachable!("every modality uses at least one encoder"),
        };
        let n = bound.len();
        self.head.forward(tape, &bound[n - 2..], features)
    }

    fn sample_inputs<'a>(
        &self,
        samples: &[&'a Sample],
    ) -> Result<(Vec<&'a EncodedText>, Vec<&'a Tensor>)> {
        let mut texts = Vec::new();
        let mut images = Vec::new();
        for (i, s) in samples.iter().enumerate() {
            if self.modality().uses_text() {
                texts.push(
                    s.text
                        .as_ref()
                        .ok_or_else(|| Error::Contract(format!("sample {i} has no text")))?,
                );
            }
            if self.modality().uses_image() {
                images.push(
                    s.image
                        .as_ref()
                        .ok_or_else(|| Error::Contract(format!("sample {i} has no image")))?,
                );
            }
        }
        Ok((texts, images))
    }

    /// Builds the forward pass for `samples` on a fresh tape.
    pub fn forward_samples(&self, samples: &[&Sample]) -> Result<(Tape, Vec<Var>, Var)> {
        let (texts, images) = self.sample_inputs(samples)?;
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let logits = self.logits(
            &mut tape,
            &bound,
            self.modality().uses_text().then_some(&texts[..]),
            self.modality().uses_image().then_some(&images[..]),
        )?;
        Ok((tape, bound, logits))
    }

    /// Class probabilities `[B×num_classes]`.
    pub fn predict_proba(&self, samples: &[&Sample]) -> Result<Tensor> {
        let (mut tape, _, logits) = self.forward_samples(samples)?;
        let probs = tape.softmax(logits)?;
        Ok(tape.value(probs).clone())
    }

    /// Probabilities from explicit per-modality batches.
    pub fn fused_forward(&self, texts: &[EncodedText], images: &[Tensor]) -> Result<Tensor> {
        let texts: Vec<&EncodedText> = texts.iter().collect();
        let images: Vec<&Tensor> = images.iter().collect();
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let logits = self.logits(&mut tape, &bound, Some(&texts), Some(&images))?;
        let probs = tape.softmax(logits)?;
        Ok(tape.value(probs).clone())
    }

    /// Mean cross-entropy over `samples` and the batch probabilities. The
    /// loss gradient is added into every trainable parameter's `grad`.
    pub fn accumulate_gradients(
        &mut self,
        samples: &[&Sample],
        labels: &[usize],
    ) -> Result<(f64, Tensor)> {
        let (mut tape, bound, logits) = self.forward_samples(samples)?;
        let loss = tape.cross_entropy(logits, labels)?;
        let probs = tape.softmax(logits)?;
        let value = tape.value(loss).values()[0];
        let probs_value = tape.value(probs).clone();
        let grads = tape.backward(loss)?;
        for (var, param) in bound.into_iter().zip(self.params_mut()) {
            grads.accumulate_into(var, param)?;
        }
        Ok((value, probs_value))
    }

    /// Mean cross-entropy and probabilities without touching gradients.
    pub fn evaluate_batch(&self, samples: &[&Sample], labels: &[usize]) -> Result<(f64, Tensor)> {
        let (mut tape, _, logits) = self.forward_samples(samples)?;
        let loss = tape.cross_entropy(logits, labels)?;
        let probs = tape.softmax(logits)?;
        Ok((tape.value(loss).values()[0], tape.value(probs).clone()))
    }
}

fn encoder_params_mut<'a>(
    text: &'a mut Option<TextEncoder>,
    image: &'a mut Option<ImageEncoder>,
) -> Vec<&'a mut Tensor> {
    let mut out = Vec::new();
    if let Some(t) = text {
        out.extend(t.params_mut());
    }
    if let Some(i) = image {
        out.extend(i.params_mut());
    }
    out
}

/// Indices of the `k` most probable classes per row, most probable first;
/// equal probabilities are ordered by lower index.
pub fn predict_topk(probs: &Tensor, k: usize) -> Result<Vec<Vec<usize>>> {
    let (rows, classes) = probs.dims2()?;
    if k == 0 || k > classes {
        return Err(Error::Contract(format!(
            "top-k with k={k} over {classes} classes"
        )));
    }
    Ok((0..rows)
        .map(|r| {
            let p = probs.row(r);
            let mut idx: Vec<usize> = (0..classes).collect();
            idx.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
            idx.truncate(k);
            idx
        })
        .collect())
}
