//! Trace classification: raw-sample features, k-nearest-neighbour and
//! random-forest rankers, top-k evaluation, and the on-disk model container.

pub mod eval;
pub mod features;
pub mod forest;
pub mod knn;
pub mod model;

use thiserror::Error;

pub use eval::{evaluate, EvalReport};
pub use features::{FeatureVector, Normalization};
pub use forest::{ForestModel, ForestParams};
pub use knn::{knn_predict, KnnModel};
pub use model::{Model, ModelKind, TrainedModel};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("feature length {found} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("model has no training points")]
    EmptyModel,
    #[error("training set needs at least two classes")]
    SingleClass,
    #[error("k = {k} exceeds the {n} training points")]
    KTooLarge { k: usize, n: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("empty test set")]
    EmptyTestSet,
    #[error("unknown device `{0}` for per-profile normalization")]
    UnknownDevice(String),
    #[error("model file: {0}")]
    ModelFile(String),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
}

/// A labeled feature vector.
pub type Sample = (Vec<f64>, String);

/// Anything that orders every known class label for a query, best first,
/// with a score in `[0, 1]`.
pub trait Ranker: Sync {
    fn classes(&self) -> &[String];
    fn dim(&self) -> usize;
    fn rank(&self, x: &[f64]) -> Result<Vec<(String, f64)>, ClassifyError>;
}
