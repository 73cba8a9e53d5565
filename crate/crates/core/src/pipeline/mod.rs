//! Dataset labelling, the assisted solve loop and benchmark accounting.

mod assisted;
mod benchmark;
mod dataset;
mod metrics;

use thiserror::Error;

pub use assisted::{infer_and_solve, predict_binaries, AssistedOutcome, AttemptStats, FallbackStats, RetryConfig};
pub use benchmark::{benchmark, median, BenchmarkReport, BenchmarkRow, BenchmarkSummary};
pub use dataset::{
    estimate_labelling_time, generate_labelled_dataset, label_instances, Dataset, DatasetConfig, LabelRecord, DATASET_SCHEMA_VERSION,
};
pub use metrics::{average_precision, evaluate_predictions, metrics_from_pairs, PredictionMetrics};

use crate::mipcore::MipError;
use crate::scenariogen::ScenarioError;
use crate::surrogate::SurrogateError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("solver backend failed: {0}")]
    Backend(String),
    #[error("class {0} absent from the labelled set")]
    ClassAbsent(u8),
    #[error("bad file: {0}")]
    Format(String),
    #[error(transparent)]
    Model(#[from] MipError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
