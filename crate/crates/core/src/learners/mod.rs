//! Regression learners: a best-first CART tree, a gradient-boosted
//! ensemble of such trees, a bagged random forest and k-nearest neighbours,
//! plus the [`FittedModel`] bundle that ties a learner to its encoding.

mod boosted;
mod forest;
mod knn;
mod model;
mod persist;
mod tree;

pub use boosted::{fit_boosted, BoostedEnsemble};
pub use forest::{fit_forest, FeatureSubset, ForestEnsemble, ForestParams};
pub use knn::{fit_knn, KnnModel};
pub use model::{
    compare_models, evaluate_scored, scored_pairs, train, ComparisonRow, FittedModel, LearnerConfig, Predictor,
};
pub use persist::{load_model, save_model, ModelError, FORMAT_VERSION};
pub use tree::{fit_tree, RegressionTree, TreeNode};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("{rows} feature rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("feature vector has width {found}, model expects {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("k = {k} is out of range for {n} training rows")]
    KOutOfRange { k: usize, n: usize },
}

/// Tree-growth and boosting hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
    pub learning_rate: f64,
    pub num_trees: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_leaves: 20,
            min_samples_leaf: 10,
            learning_rate: 0.2,
            num_trees: 100,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<(), LearnerError> {
        if self.max_leaves < 2 {
            return Err(LearnerError::InvalidParams(format!(
                "max_leaves must be at least 2, got {}",
                self.max_leaves
            )));
        }
        if self.min_samples_leaf < 1 {
            return Err(LearnerError::InvalidParams(
                "min_samples_leaf must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(LearnerError::InvalidParams(format!(
                "learning_rate must be in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.num_trees < 1 {
            return Err(LearnerError::InvalidParams("num_trees must be at least 1".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_training_shape(n_rows: usize, n_targets: usize) -> Result<(), LearnerError> {
    if n_rows != n_targets {
        return Err(LearnerError::LengthMismatch {
            rows: n_rows,
            targets: n_targets,
        });
    }
    if n_rows == 0 {
        return Err(LearnerError::EmptyTrainingSet);
    }
    Ok(())
}

pub(crate) fn check_width(expected: usize, x: &[f64]) -> Result<(), LearnerError> {
    if x.len() != expected {
        return Err(LearnerError::WidthMismatch {
            expected,
            found: x.len(),
        });
    }
    Ok(())
}

/// Mean computed over the values sorted ascending, so the result does not
/// depend on the order the values arrive in.
pub(crate) fn order_free_mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}
