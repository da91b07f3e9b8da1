use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::models::{Classifier, Modality, Sample};
use crate::optim::{Adam, AdamConfig};

/// Inputs with their class labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Examples {
    pub samples: Vec<Sample>,
    pub labels: Vec<usize>,
}

impl Examples {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub modality: Modality,
    pub freeze_encoders: bool,
    /// Stop after this many epochs without a validation-loss improvement;
    /// 0 disables early stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
            modality: Modality::Fused,
            freeze_encoders: false,
            patience: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters the model holds after training.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

fn correct_top1(probs: &Tensor, labels: &[usize]) -> usize {
    labels
        .iter()
        .enumerate()
        .filter(|&(r, &l)| {
            let row = probs.row(r);
            let best = (0..row.len()).fold(0, |b, j| if row[j] > row[b] { j } else { b });
            best == l
        })
        .count()
}

/// Mean loss and probabilities `[N×K]`, evaluated in batches of
/// `batch_size`.
pub fn evaluate(model: &Classifier, data: &Examples, batch_size: usize) -> Result<(f64, Tensor)> {
    if data.is_empty() {
        return Err(Error::Contract("cannot evaluate an empty set".into()));
    }
    let k = model.config().num_classes;
    let mut total = 0.0;
    let mut probs = Vec::with_capacity(data.len() * k);
    for start in (0..data.len()).step_by(batch_size.max(1)) {
        let end = (start + batch_size.max(1)).min(data.len());
        let samples: Vec<&Sample> = data.samples[start..end].iter().collect();
        let (loss, p) = model.evaluate_batch(&samples, &data.labels[start..end])?;
        total += loss * (end - start) as f64;
        probs.extend_from_slice(p.values());
    }
    Ok((
        total / data.len() as f64,
        Tensor::new(&[data.len(), k], probs)?,
    ))
}

/// Probabilities `[N×K]` for `samples`.
pub fn predict(model: &Classifier, samples: &[Sample], batch_size: usize) -> Result<Tensor> {
    if samples.is_empty() {
        return Err(Error::Contract("cannot predict an empty set".into()));
    }
    let k = model.config().num_classes;
    let mut probs = Vec::with_capacity(samples.len() * k);
    for chunk in samples.chunks(batch_size.max(1)) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        probs.extend_from_slice(model.predict_proba(&refs)?.values());
    }
    Tensor::new(&[samples.len(), k], probs)
}

/// Lowest validation loss, its epoch, and the parameters at that point.
type Best = (f64, usize, Vec<(String, Tensor)>);

fn snapshot(model: &Classifier) -> Vec<(String, Tensor)> {
    model
        .named_params()
        .into_iter()
        .map(|(n, p)| {
            (
                n,
                Tensor::new(p.shape(), p.values().to_vec()).expect("parameter shapes are valid"),
            )
        })
        .collect()
}

/// Mini-batch Adam on mean cross-entropy.
///
/// Each epoch visits `train` in a fresh seeded order. With a validation
/// set the model ends holding the parameters of the epoch with the lowest
/// validation loss; otherwise those of the last epoch.
pub fn train(
    model: &mut Classifier,
    train: &Examples,
    validation: Option<&Examples>,
    config: &TrainConfig,
) -> Result<TrainReport> {
    if train.is_empty() {
        return Err(Error::Contract("training split is empty".into()));
    }
    if train.samples.len() != train.labels.len() {
        return Err(Error::Contract(
            "samples and labels differ in length".into(),
        ));
    }
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(Error::Config(
            "epochs and batch_size must be at least 1".into(),
        ));
    }
    if config.modality != model.modality() {
        return Err(Error::Contract(format!(
            "config selects {} but the model is {}",
            config.modality,
            model.modality()
        )));
    }
    let validation = validation.filter(|v| !v.is_empty());
    model.set_freeze_encoders(config.freeze_encoders);

    let mut adam = Adam::new(config.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<Best> = None;
    let mut stopped_early = false;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let samples: Vec<&Sample> = idx.iter().map(|&i| &train.samples[i]).collect();
            let labels: Vec<usize> = idx.iter().map(|&i| train.labels[i]).collect();
            model.zero_grads();
            let (loss, probs) = match model.accumulate_gradients(&samples, &labels) {
                Ok(out) if out.0.is_finite() => out,
                Ok(_) | Err(Error::NonFinite { .. }) => {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch: batch + 1,
                    })
                }
                Err(e) => return Err(e),
            };
            loss_sum += loss * idx.len() as f64;
            correct += correct_top1(&probs, &labels);
            let (names, mut params) = model.trainable_params_mut();
            adam.step(&mut params, &names)?;
        }
        let mut record = EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_accuracy: correct as f64 / train.len() as f64,
            val_loss: None,
            val_accuracy: None,
        };
        if let Some(val) = validation {
            let (loss, probs) = evaluate(model, val, config.batch_size)?;
            record.val_loss = Some(loss);
            record.val_accuracy = Some(correct_top1(&probs, &val.labels) as f64 / val.len() as f64);
            if best.as_ref().is_none_or(|(b, _, _)| loss < *b) {
                best = Some((loss, epoch, snapshot(model)));
            }
        }
        history.push(record);
        if let (Some((_, best_epoch, _)), true) = (&best, config.patience > 0) {
            if epoch - best_epoch >= config.patience && epoch < config.epochs {
                stopped_early = true;
                break;
            }
        }
    }

    let best_epoch = match best {
        Some((_, epoch, params)) => {
            for (name, value) in &params {
                model.set_param(name, value)?;
            }
            epoch
        }
        None => history.len(),
    };
    Ok(TrainReport {
        history,
        best_epoch,
        stopped_early,
    })
}
