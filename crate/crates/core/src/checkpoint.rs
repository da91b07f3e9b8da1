//! Trained-model files: a JSON header (configuration, vocabulary and
//! parameter layout) followed by the raw little-endian `f64` parameter
//! values, so reloading restores every weight bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::models::{Classifier, ModelConfig};
use crate::text::Vocabulary;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"GENRECK\n";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: RunConfig,
    model: ModelConfig,
    best_epoch: usize,
    /// Vocabulary file text; absent for image-only models.
    vocabulary: Option<String>,
    params: Vec<ParamLayout>,
}

/// A trained classifier with everything needed to rebuild its inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub model: Classifier,
    pub vocabulary: Option<Vocabulary>,
    pub best_epoch: usize,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let named = self.model.named_params();
        let header = Header {
            format_version: FORMAT_VERSION,
            config: self.config.clone(),
            model: self.model.config().clone(),
            best_epoch: self.best_epoch,
            vocabulary: self.vocabulary.as_ref().map(|v| v.to_text(None)),
            params: named
                .iter()
                .map(|(name, p)| ParamLayout {
                    name: name.clone(),
                    shape: p.shape().to_vec(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("checkpoint header serializes");
        let count: usize = named.iter().map(|(_, p)| p.len()).sum();
        let mut out = Vec::with_capacity(MAGIC.len() + 8 + json.len() + 8 * count);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, p) in named {
            for v in p.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |m: &str| Error::format(path, m);
        let rest = bytes
            .strip_prefix(MAGIC)
            .ok_or_else(|| bad("not a checkpoint file"))?;
        if rest.len() < 8 {
            return Err(bad("truncated header"));
        }
        let (len, rest) = rest.split_at(8);
        let len = u64::from_le_bytes(len.try_into().expect("8 bytes")) as usize;
        if rest.len() < len {
            return Err(bad("truncated header"));
        }
        let (json, mut data) = rest.split_at(len);
        let header: Header = serde_json::from_slice(json).map_err(|e| Error::format(path, e))?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Compatibility(format!(
                "checkpoint format {} is not supported (expected {FORMAT_VERSION})",
                header.format_version
            )));
        }
        let vocabulary = header
            .vocabulary
            .as_deref()
            .map(|text| Vocabulary::parse(text, path))
            .transpose()?;
        let mut model = Classifier::new(header.model, 0)?;
        let expected: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
        let stored: Vec<&String> = header.params.iter().map(|p| &p.name).collect();
        if expected.iter().collect::<Vec<_>>() != stored {
            return Err(Error::Compatibility(format!(
                "checkpoint parameters {stored:?} do not match the model layout {expected:?}"
            )));
        }
        for layout in &header.params {
            let n: usize = layout.shape.iter().product();
            if data.len() < 8 * n {
                return Err(bad("truncated parameter data"));
            }
            let (chunk, tail) = data.split_at(8 * n);
            data = tail;
            let values = chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            model.set_param(&layout.name, &Tensor::new(&layout.shape, values)?)?;
        }
        if !data.is_empty() {
            return Err(bad("trailing bytes after parameter data"));
        }
        Ok(Self {
            config: header.config,
            model,
            vocabulary,
            best_epoch: header.best_epoch,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}
