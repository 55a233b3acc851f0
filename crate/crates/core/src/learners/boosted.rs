use super::tree::{grow, RegressionTree};
use super::{check_training_shape, check_width, order_free_mean, LearnerError, TreeParams};
use crate::matrix::Matrix;

/// Stage-wise additive model: `base_score + shrinkage * sum(tree(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostedEnsemble {
    base_score: f64,
    shrinkage: f64,
    trees: Vec<RegressionTree>,
    params: TreeParams,
    n_features: usize,
}

/// Gradient boosting under squared loss.
///
/// `F0` is the target mean; stage `m` fits a tree to the residuals
/// `y - F(m-1)(x)` and adds it scaled by the learning rate.
pub fn fit_boosted(x: &Matrix, y: &[f64], params: &TreeParams) -> Result<BoostedEnsemble, LearnerError> {
    check_training_shape(x.n_rows(), y.len())?;
    params.validate()?;

    let n = x.n_rows();
    let base_score = order_free_mean(y.iter().copied());
    let nu = params.learning_rate;
    let mut current = vec![base_score; n];
    let mut residuals = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.num_trees);
    for _ in 0..params.num_trees {
        for i in 0..n {
            residuals[i] = y[i] - current[i];
        }
        let tree = grow(x, &residuals, (0..n).collect(), params, None);
        for (i, f) in current.iter_mut().enumerate() {
            *f += nu * tree.predict_unchecked(x.row(i));
        }
        trees.push(tree);
    }
    Ok(BoostedEnsemble {
        base_score,
        shrinkage: nu,
        trees,
        params: *params,
        n_features: x.n_cols(),
    })
}

impl BoostedEnsemble {
    /// Zero-stage model that predicts the training mean everywhere.
    pub fn mean_only(y: &[f64], n_features: usize) -> Result<Self, LearnerError> {
        if y.is_empty() {
            return Err(LearnerError::EmptyTrainingSet);
        }
        Ok(BoostedEnsemble {
            base_score: order_free_mean(y.iter().copied()),
            shrinkage: 1.0,
            trees: Vec::new(),
            params: TreeParams {
                num_trees: 0,
                learning_rate: 1.0,
                ..TreeParams::default()
            },
            n_features,
        })
    }

    pub(crate) fn from_parts(
        base_score: f64,
        shrinkage: f64,
        trees: Vec<RegressionTree>,
        params: TreeParams,
        n_features: usize,
    ) -> Self {
        BoostedEnsemble {
            base_score,
            shrinkage,
            trees,
            params,
            n_features,
        }
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Trees are summed in list order, then scaled once.
    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_unchecked(x)).sum();
        self.base_score + self.shrinkage * sum
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, LearnerError> {
        check_width(self.n_features, x)?;
        Ok(self.predict_unchecked(x))
    }

    /// Predictions of every row after each stage: element `m` holds the
    /// predictions of the first `m` trees (element 0 is the base score).
    pub fn staged_predictions(&self, x: &Matrix) -> Result<Vec<Vec<f64>>, LearnerError> {
        if x.n_cols() != self.n_features {
            return Err(LearnerError::WidthMismatch {
                expected: self.n_features,
                found: x.n_cols(),
            });
        }
        let mut sums = vec![0.0; x.n_rows()];
        let mut stages = Vec::with_capacity(self.trees.len() + 1);
        stages.push(vec![self.base_score; x.n_rows()]);
        for tree in &self.trees {
            for (i, s) in sums.iter_mut().enumerate() {
                *s += tree.predict_unchecked(x.row(i));
            }
            stages.push(sums.iter().map(|s| self.base_score + self.shrinkage * s).collect());
        }
        Ok(stages)
    }
}
