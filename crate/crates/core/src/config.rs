//! Resolved run configuration: defaults, then a TOML file, then
//! command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::NUM_GENRES;
use crate::error::{Error, Result};
use crate::models::{Modality, ModelConfig};
use crate::optim::AdamConfig;
use crate::training::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub modality: Modality,
    /// Optional TSV of extra genre aliases.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alias_table: Option<PathBuf>,
    pub stratify: bool,
    pub include_title: bool,
    pub min_count: usize,
    pub max_len: usize,
    pub image_size: usize,
    pub embed_dim: usize,
    pub hidden_size: usize,
    pub conv_channels: Vec<usize>,
    pub image_features: usize,
    pub freeze_encoders: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        let train = TrainConfig::default();
        Self {
            seed: 0,
            modality: model.modality,
            alias_table: None,
            stratify: false,
            include_title: false,
            min_count: 10,
            max_len: 200,
            image_size: model.image_size,
            embed_dim: model.embed_dim,
            hidden_size: model.hidden_size,
            conv_channels: model.conv_channels,
            image_features: model.image_features,
            freeze_encoders: model.freeze_encoders,
            epochs: train.epochs,
            batch_size: train.batch_size,
            patience: train.patience,
            lr: train.adam.lr,
            beta1: train.adam.beta1,
            beta2: train.adam.beta2,
            adam_eps: train.adam.eps,
        }
    }
}

/// Command-line values; `None` leaves the file or default value in place.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub modality: Option<Modality>,
    pub image_size: Option<usize>,
    pub max_len: Option<usize>,
    pub min_count: Option<usize>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub freeze_encoders: Option<bool>,
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::format(path, e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    /// Defaults, overlaid by `file` if given, overlaid by `overrides`.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut config = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = o.$field.clone() {
                    self.$field = v;
                }
            )*};
        }
        set!(
            seed,
            modality,
            image_size,
            max_len,
            min_count,
            epochs,
            batch_size,
            lr,
            freeze_encoders
        );
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("min_count", self.min_count),
            ("max_len", self.max_len),
            ("image_size", self.image_size),
            ("embed_dim", self.embed_dim),
            ("hidden_size", self.hidden_size),
            ("image_features", self.image_features),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return Err(Error::Config(
                "conv_channels needs at least one positive entry".into(),
            ));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "lr must be finite and nonnegative, got {}",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("beta1 and beta2 must be in [0, 1)".into()));
        }
        if !self.adam_eps.is_finite() || self.adam_eps <= 0.0 {
            return Err(Error::Config("adam_eps must be positive".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Single-line JSON form embedded in artifacts.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("run config serializes")
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            modality: self.modality,
            num_classes: NUM_GENRES,
            vocab_size,
            embed_dim: self.embed_dim,
            hidden_size: self.hidden_size,
            image_size: self.image_size,
            conv_channels: self.conv_channels.clone(),
            image_features: self.image_features,
            freeze_encoders: self.freeze_encoders,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.adam_eps,
            },
            seed: self.seed,
            modality: self.modality,
            freeze_encoders: self.freeze_encoders,
            patience: self.patience,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, text: &str) -> PathBuf {
        let p = dir.join("run.toml");
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let file = write(
            dir.path(),
            "seed = 7\nepochs = 3\nmodality = \"text\"\nlr = 0.01\n",
        );
        let overrides = Overrides {
            epochs: Some(9),
            freeze_encoders: Some(true),
            ..Default::default()
        };
        let c = RunConfig::resolve(Some(&file), &overrides).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.epochs, 9);
        assert_eq!(c.modality, Modality::Text);
        assert_eq!(c.lr, 0.01);
        assert!(c.freeze_encoders);
        assert_eq!(c.batch_size, 32);
        assert_eq!(c.max_len, 200);
        let defaults = RunConfig::resolve(None, &Overrides::default()).unwrap();
        assert_eq!(defaults, RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_errors() {
        let err = RunConfig::from_toml("seed = 1\nlearning_rate = 0.1\n", Path::new("x.toml"))
            .unwrap_err();
        assert!(err.to_string().contains("learning_rate"), "{err}");
    }

    #[test]
    fn invalid_values_are_errors() {
        assert!(RunConfig::from_toml("batch_size = 0\n", Path::new("x")).is_err());
        assert!(RunConfig::from_toml("modality = \"audio\"\n", Path::new("x")).is_err());
        assert!(RunConfig::from_toml("conv_channels = []\n", Path::new("x")).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig {
            lr: 0.0003,
            adam_eps: 1e-8,
            alias_table: Some(PathBuf::from("aliases.tsv")),
            ..Default::default()
        };
        let back = RunConfig::from_toml(&c.to_toml(), Path::new("echo")).unwrap();
        assert_eq!(back, c);
        let json: RunConfig = serde_json::from_str(&c.to_json_line()).unwrap();
        assert_eq!(json, c);
    }

    #[test]
    fn defaults_match_component_defaults() {
        let c = RunConfig::default();
        assert_eq!(c.train_config(), TrainConfig::default());
        assert_eq!(c.model_config(2), ModelConfig::default());
    }
}
