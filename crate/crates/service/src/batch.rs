use evprice_core::dataset::{parse_csv, to_csv, Dataset, DatasetError};
use evprice_core::learners::FittedModel;
use evprice_core::metrics::{self, EvaluationReport, MetricsError};
use evprice_core::Error;

/// Name of the per-row `Price - Scored Labels` column.
pub const ERROR_COLUMN: &str = "Error";

#[derive(Debug, Clone, PartialEq)]
pub struct BatchScore {
    /// Input columns, then `Scored Labels`, then `Error`.
    pub scored: Dataset,
    pub csv: String,
    /// Fails only when the metrics are undefined (for example, constant
    /// targets); the scored rows are still returned.
    pub report: Result<EvaluationReport, MetricsError>,
}

/// Scores every row of a CSV that carries the model's target column and
/// reports per-row errors plus the five evaluation metrics.
pub fn batch_score(model: &FittedModel, csv_text: &str) -> Result<BatchScore, Error> {
    let ds = parse_csv(csv_text, Some(model.schema()))?;
    let target = &model.encoding().target;
    let t = ds.require_column(target)?;
    let y = ds
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r[t].as_number().ok_or_else(|| DatasetError::MissingTarget {
                row: i,
                column: target.clone(),
            })
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let y_hat = model.predict_dataset(&ds)?;
    let errors: Vec<f64> = y.iter().zip(&y_hat).map(|(a, b)| a - b).collect();
    let scored = model.score(&ds)?.with_numeric_column(ERROR_COLUMN, &errors)?;
    Ok(BatchScore {
        csv: to_csv(&scored),
        report: metrics::evaluate(&y, &y_hat),
        scored,
    })
}
