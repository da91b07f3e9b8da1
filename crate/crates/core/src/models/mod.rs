//! Text-only, image-only and late-fusion genre classifiers.

mod classifier;
mod image_encoder;
mod layers;
mod text_encoder;

pub use classifier::{predict_topk, Classifier, Modality, ModelConfig, Sample};
pub use image_encoder::{ConvBlock, ImageEncoder};
pub use layers::Dense;
pub use text_encoder::TextEncoder;
