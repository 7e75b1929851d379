//! Alignment quality: features and a boosted-tree IoU estimator, plus the
//! corpus filters built on top of it.

mod features;
mod filters;
mod gbdt;
mod langid;

pub use features::{extract_features, DocumentAlignment, Extracted, IouFeatures, FEATURE_NAMES};
pub use filters::{
    apply_filters, chars_per_second, length_ratio_guard, length_ratio_ok, FilterConfig,
    FilterOutcome, RejectionCounts, SplitRole,
};
pub use gbdt::{
    crossval_mae, fold_assignment, predict_iou, train_gbdt, GbdtHyperparams, GbdtModel, Node,
};
pub use langid::{CommandDetector, LanguageDetector, ProfileDetector, UNKNOWN_LANGUAGE};

use crate::align::AlignError;

#[derive(Debug, thiserror::Error)]
pub enum QualityError {
    #[error("not featurizable: {0}")]
    NotFeaturizable(&'static str),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),
    #[error("invalid training data: {0}")]
    Data(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("invalid filter config: {0}")]
    Config(String),
    #[error("entry {0} lacks a span or an IoU estimate")]
    NotFilterable(usize),
    #[error("language detector: {0}")]
    Detector(String),
}
