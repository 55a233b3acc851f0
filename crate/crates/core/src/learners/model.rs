use serde::{Deserialize, Serialize};

use super::{
    fit_boosted, fit_forest, fit_knn, fit_tree, BoostedEnsemble, ForestEnsemble, ForestParams, KnnModel, LearnerError,
    RegressionTree, TreeParams,
};
use crate::dataset::{fit_encoding, ColumnSchema, Dataset, DatasetError, EncodingSpec, SCORED_LABELS};
use crate::metrics::{self, EvaluationReport, MetricsError};
use crate::Error;

/// Which learner to train, with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "snake_case")]
pub enum LearnerConfig {
    Boosted(TreeParams),
    Tree(TreeParams),
    Forest(ForestParams),
    Knn {
        #[serde(default = "default_k")]
        k: usize,
    },
    /// Predicts the training mean (a boosted model with zero stages).
    Mean,
}

fn default_k() -> usize {
    5
}

impl LearnerConfig {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerConfig::Boosted(_) => "boosted",
            LearnerConfig::Tree(_) => "tree",
            LearnerConfig::Forest(_) => "forest",
            LearnerConfig::Knn { .. } => "knn",
            LearnerConfig::Mean => "mean",
        }
    }

    /// Human-readable algorithm name for report tables.
    pub fn display_name(&self) -> &'static str {
        match self {
            LearnerConfig::Boosted(_) => "Gradient Boosted Trees",
            LearnerConfig::Tree(_) => "Decision Tree",
            LearnerConfig::Forest(_) => "Random Forest",
            LearnerConfig::Knn { .. } => "k-Nearest Neighbours",
            LearnerConfig::Mean => "Mean Predictor",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    Tree(RegressionTree),
    Boosted(BoostedEnsemble),
    Forest(ForestEnsemble),
    Knn(KnnModel),
}

impl Predictor {
    pub fn kind(&self) -> &'static str {
        match self {
            Predictor::Tree(_) => "tree",
            Predictor::Boosted(_) => "boosted",
            Predictor::Forest(_) => "forest",
            Predictor::Knn(_) => "knn",
        }
    }

    pub fn tree_count(&self) -> usize {
        match self {
            Predictor::Tree(_) => 1,
            Predictor::Boosted(b) => b.trees().len(),
            Predictor::Forest(f) => f.trees().len(),
            Predictor::Knn(_) => 0,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, LearnerError> {
        match self {
            Predictor::Tree(t) => t.predict(x),
            Predictor::Boosted(b) => b.predict(x),
            Predictor::Forest(f) => f.predict(x),
            Predictor::Knn(k) => k.predict(x),
        }
    }
}

/// A trained predictor together with the schema and encoding it was fit on.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    schema: Vec<ColumnSchema>,
    encoding: EncodingSpec,
    predictor: Predictor,
}

/// Fits the encoding on `ds`, then the configured learner on the encoded rows.
pub fn train(config: &LearnerConfig, ds: &Dataset) -> Result<FittedModel, Error> {
    let encoding = fit_encoding(ds)?;
    let (x, y) = encoding.encode(ds)?;
    let predictor = match config {
        LearnerConfig::Boosted(p) => Predictor::Boosted(fit_boosted(&x, &y, p)?),
        LearnerConfig::Tree(p) => Predictor::Tree(fit_tree(&x, &y, p)?),
        LearnerConfig::Forest(p) => Predictor::Forest(fit_forest(&x, &y, p)?),
        LearnerConfig::Knn { k } => Predictor::Knn(fit_knn(&x, &y, *k)?),
        LearnerConfig::Mean => Predictor::Boosted(BoostedEnsemble::mean_only(&y, x.n_cols())?),
    };
    Ok(FittedModel {
        schema: ds.schema().to_vec(),
        encoding,
        predictor,
    })
}

impl FittedModel {
    pub(crate) fn from_parts(schema: Vec<ColumnSchema>, encoding: EncodingSpec, predictor: Predictor) -> Self {
        FittedModel {
            schema,
            encoding,
            predictor,
        }
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn encoding(&self) -> &EncodingSpec {
        &self.encoding
    }

    pub fn predictor(&self) -> &Predictor {
        &self.predictor
    }

    pub fn model_kind(&self) -> &'static str {
        self.predictor.kind()
    }

    pub fn tree_count(&self) -> usize {
        self.predictor.tree_count()
    }

    /// Predictions for every row of `ds`, which needs the model's feature
    /// columns but not the target.
    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<f64>, Error> {
        let x = self.encoding.encode_features(ds)?;
        x.rows()
            .map(|r| self.predictor.predict(r).map_err(Error::from))
            .collect()
    }

    /// `ds` plus a trailing `Scored Labels` column.
    pub fn score(&self, ds: &Dataset) -> Result<Dataset, Error> {
        let preds = self.predict_dataset(ds)?;
        Ok(ds.with_numeric_column(SCORED_LABELS, &preds)?)
    }
}

/// Targets and `Scored Labels` of a scored dataset.
pub fn scored_pairs(scored: &Dataset) -> Result<(Vec<f64>, Vec<f64>), DatasetError> {
    let t = scored.target_index()?;
    let s = scored.require_column(SCORED_LABELS)?;
    let target = scored.schema()[t].name.clone();
    let mut y = Vec::with_capacity(scored.n_rows());
    let mut y_hat = Vec::with_capacity(scored.n_rows());
    for (i, row) in scored.rows().iter().enumerate() {
        y.push(row[t].as_number().ok_or_else(|| DatasetError::MissingTarget {
            row: i,
            column: target.clone(),
        })?);
        y_hat.push(row[s].as_number().ok_or_else(|| DatasetError::MissingFeature {
            row: i,
            column: SCORED_LABELS.into(),
        })?);
    }
    Ok((y, y_hat))
}

/// Evaluate Model: the five metrics of a scored dataset.
pub fn evaluate_scored(scored: &Dataset) -> Result<EvaluationReport, Error> {
    let (y, y_hat) = scored_pairs(scored)?;
    Ok(metrics::evaluate(&y, &y_hat)?)
}

fn residual_std(y: &[f64], y_hat: &[f64]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let n = y.len() as f64;
    let r: Vec<f64> = y.iter().zip(y_hat).map(|(a, b)| a - b).collect();
    let mean = r.iter().sum::<f64>() / n;
    (r.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub algorithm: String,
    pub display_name: String,
    pub rmse: f64,
    pub mae: f64,
    /// Population standard deviation of the held-out residuals `y - y_hat`.
    pub residual_std: f64,
    /// `None` when the test targets have zero variance.
    pub report: Option<EvaluationReport>,
}

/// Trains each configuration on `train`, scores `test`, and returns the
/// rows sorted by RMSE ascending (stable for equal RMSE).
pub fn compare_models(
    train_ds: &Dataset,
    test: &Dataset,
    configs: &[LearnerConfig],
) -> Result<Vec<ComparisonRow>, Error> {
    let (a, b) = (train_ds.schema(), test.schema());
    if let Some(col) = a
        .iter()
        .zip(b)
        .find(|(x, y)| x.name != y.name || x.kind != y.kind)
        .map(|(x, _)| x.name.clone())
        .or_else(|| (a.len() != b.len()).then(|| a.get(b.len()).or(b.get(a.len())).unwrap().name.clone()))
    {
        return Err(DatasetError::SchemaMismatch { column: col }.into());
    }

    let mut rows = Vec::with_capacity(configs.len());
    for config in configs {
        let model = train(config, train_ds)?;
        let (y, y_hat) = scored_pairs(&model.score(test)?)?;
        let residual_std = residual_std(&y, &y_hat);
        let row = match metrics::evaluate(&y, &y_hat) {
            Ok(r) => ComparisonRow {
                algorithm: config.name().to_string(),
                display_name: config.display_name().to_string(),
                residual_std,
                rmse: r.rmse,
                mae: r.mae,
                report: Some(r),
            },
            Err(MetricsError::DegenerateVariance { mae, rmse }) => ComparisonRow {
                algorithm: config.name().to_string(),
                display_name: config.display_name().to_string(),
                residual_std,
                rmse,
                mae,
                report: None,
            },
            Err(e) => return Err(e.into()),
        };
        rows.push(row);
    }
    rows.sort_by(|x, y| x.rmse.total_cmp(&y.rmse));
    Ok(rows)
}
