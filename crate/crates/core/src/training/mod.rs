//! Training loop and evaluation metrics.

mod metrics;
mod report;
mod train;

pub use metrics::{confusion_matrix, per_genre_accuracy, top1, top_k_accuracy};
pub use report::{EvaluationReport, GenreAccuracy, REPORT_KS};
pub use train::{evaluate, predict, train, EpochRecord, Examples, TrainConfig, TrainReport};

#[cfg(test)]
mod tests;
