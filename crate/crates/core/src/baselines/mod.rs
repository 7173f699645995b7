//! Traditional-ML comparison pipeline: feature providers (native
//! TF-IDF, embedding files, an embeddings endpoint), a multinomial
//! logistic regression trained by gradient descent, a nearest-centroid
//! classifier, and a stratified train/test split.
//!
//! The numbers these baselines produce depend on features and
//! hyperparameters, so every report they feed records the exact
//! configuration used. Other classifiers can join the comparison by
//! exporting their predictions to a file.

mod centroid;
mod features;
mod logistic;
mod split;
pub mod synthetic;

pub use centroid::{train_nearest_centroid, CentroidModel};
pub use features::{
    fetch_embeddings, load_embeddings, tfidf_features, EmbeddingsSpec, EmbeddingTransport,
    FeatureMatrix, HttpEmbeddingTransport, MockEmbeddingTransport, TfidfFeatures,
};
pub use logistic::{loss_and_gradient, train_logistic, LogisticModel, LogisticParams};
pub use split::{split, SplitSpec};

use crate::gateway::GatewayError;
use crate::label::RequirementLabel;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("EMPTY_CORPUS: no reviews to featurize")]
    EmptyCorpus,
    #[error("MISSING_REVIEW_ID: no embedding row for review {0}")]
    MissingReviewId(String),
    #[error("DIM_MISMATCH: expected dimension {expected}, found {found} ({context})")]
    DimMismatch {
        expected: usize,
        found: usize,
        context: String,
    },
    #[error("CLASS_TOO_SMALL: class {label} has {size} review(s); stratified splitting needs at least 2")]
    ClassTooSmall { label: RequirementLabel, size: usize },
    #[error("NONFINITE_LOSS at iteration {iteration}: training diverged; try a lower learning rate")]
    NonfiniteLoss { iteration: usize },
    #[error("EMPTY_CLASS: class {0} has no training points")]
    EmptyClass(RequirementLabel),
    #[error("LENGTH_MISMATCH: {rows} feature rows vs {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("BAD_EMBEDDING_FILE: {0}")]
    BadEmbeddingFile(String),
    #[error("MISSING_GOLD_LABEL: review {0} has no gold label")]
    MissingGoldLabel(String),
    #[error("INVALID_PARAMETER: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}
