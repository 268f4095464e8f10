//! Learning binary classifiers from positive, unlabeled and exposure data.

pub mod datagen;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod loss;
pub mod oracle;
pub mod risks;
pub mod scorer;
pub mod train;

pub use dataset::{FeatureVector, LabeledSampleSet};
pub use error::{Column, PueError, Result, Role};
pub use loss::{classify, log_loss, logistic, sigmoid, Probability, EPSILON};
pub use risks::{RiskEval, RiskKind, RiskSpec, Roles};
pub use scorer::LinearScorer;
pub use train::{
    minimize, train_adpue_alternate, train_adpue_direct, train_variant, TrainConfig, TrainTrace,
};
