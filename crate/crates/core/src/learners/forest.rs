use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow, validate_growth, FeatureSampler, RegressionTree};
use super::{check_training_shape, check_width, LearnerError, TreeParams};
use crate::matrix::Matrix;

/// How many features each split may consider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubset {
    /// `ceil(sqrt(p))`
    Sqrt,
    All,
    Fixed(usize),
}

impl FeatureSubset {
    pub fn size(self, p: usize) -> usize {
        match self {
            FeatureSubset::Sqrt => (p as f64).sqrt().ceil() as usize,
            FeatureSubset::All => p,
            FeatureSubset::Fixed(k) => k.min(p),
        }
        .max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    #[serde(flatten)]
    pub tree: TreeParams,
    pub n_trees: usize,
    pub seed: u64,
    pub bootstrap: bool,
    pub feature_subset: FeatureSubset,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            tree: TreeParams::default(),
            n_trees: 100,
            seed: 42,
            bootstrap: true,
            feature_subset: FeatureSubset::Sqrt,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestEnsemble {
    trees: Vec<RegressionTree>,
    params: ForestParams,
    features_per_split: usize,
    n_features: usize,
}

/// Bagged trees with per-split feature subsampling.
///
/// A master ChaCha8 stream seeded with `params.seed` hands each tree its own
/// seed; a tree's stream draws its bootstrap sample (n indices with
/// replacement) and then its split feature subsets.
pub fn fit_forest(x: &Matrix, y: &[f64], params: &ForestParams) -> Result<ForestEnsemble, LearnerError> {
    check_training_shape(x.n_rows(), y.len())?;
    validate_growth(&params.tree)?;
    if params.n_trees < 1 {
        return Err(LearnerError::InvalidParams("n_trees must be at least 1".into()));
    }
    let n = x.n_rows();
    let per_split = params.feature_subset.size(x.n_cols());
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    let trees = (0..params.n_trees)
        .map(|_| {
            let mut rng = ChaCha8Rng::seed_from_u64(master.random());
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let sampler = FeatureSampler {
                rng: &mut rng,
                per_split,
            };
            grow(x, y, rows, &params.tree, Some(sampler))
        })
        .collect();
    Ok(ForestEnsemble {
        trees,
        params: *params,
        features_per_split: per_split,
        n_features: x.n_cols(),
    })
}

impl ForestEnsemble {
    pub(crate) fn from_parts(trees: Vec<RegressionTree>, params: ForestParams, n_features: usize) -> Self {
        ForestEnsemble {
            features_per_split: params.feature_subset.size(n_features),
            trees,
            params,
            n_features,
        }
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn features_per_split(&self) -> usize {
        self.features_per_split
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_unchecked(x)).sum();
        sum / self.trees.len() as f64
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, LearnerError> {
        check_width(self.n_features, x)?;
        Ok(self.predict_unchecked(x))
    }
}
