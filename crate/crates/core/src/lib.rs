//! Data handling, learners, metrics and pipeline execution for used-vehicle
//! price prediction.

pub mod dataset;
pub mod learners;
pub mod matrix;
pub mod metrics;
pub mod pipeline;

use thiserror::Error;

pub use dataset::DatasetError;
pub use learners::{LearnerError, ModelError};
pub use metrics::MetricsError;
pub use pipeline::PipelineError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}
