//! Learned prediction of the model's binary variables.
//!
//! Instances are encoded as fixed-shape feature maps with EV padding up to
//! `e_max`, a small convolutional classifier predicts one probability per
//! binary of every (padded) EV block, and calibrated thresholds turn the
//! confident predictions into a partial assignment for the solver.

mod features;
mod labels;
mod model;
pub mod net;
mod thresholds;
mod train;

use thiserror::Error;

pub use features::{encode_features, encode_instance, FeatureLayout, FeatureMap, Normalizer};
pub use labels::{extract_labels, LabelVector};
pub use model::{BinaryPredictor, Sample, SurrogateModel, MODEL_FORMAT_VERSION, MODEL_MAGIC};
pub use thresholds::{
    bump_threshold, filter_predictions, fix_decision, max_attempts, thresholds_from_pairs, Thresholds, BUMP_STEP,
};
pub use train::{calibrate_thresholds, train, ArchConfig, ClassWeighting, EpochStats, TrainConfig, TrainReport};

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("{evs} EVs exceed the padding capacity {e_max}")]
    TooManyEvs { evs: usize, e_max: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty dataset")]
    Empty,
    #[error("labels need a single-scenario solution, got {0} scenarios")]
    NotDeterministic(usize),
    #[error("solution has no values")]
    NoSolution,
    #[error("class {0} absent from the evaluation set")]
    ClassAbsent(u8),
    #[error("thresholds ({0}, {1}) outside [0, 1]")]
    Thresholds(f64, f64),
    #[error("bad model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
