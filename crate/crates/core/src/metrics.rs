//! Regression error metrics: MAE, RMSE, relative absolute and relative
//! squared error, and the coefficient of determination.
//!
//! All five use population (divide-by-n) conventions. The relative errors
//! are normalized by the error of the mean predictor, so they are undefined
//! when every target is equal; that case is reported as
//! [`MetricsError::DegenerateVariance`] rather than propagating NaN.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("targets and predictions differ in length ({targets} vs {predictions})")]
    LengthMismatch { targets: usize, predictions: usize },
    #[error("cannot evaluate an empty set")]
    Empty,
    /// All targets are equal. MAE and RMSE are still well defined.
    #[error("targets have zero variance; relative errors are undefined (MAE {mae}, RMSE {rmse})")]
    DegenerateVariance { mae: f64, rmse: f64 },
}

/// Output of the Evaluate Model step. Fields are declared (and serialized)
/// in the order the Studio report lists them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    #[serde(rename = "Root Mean Squared Error")]
    pub rmse: f64,
    #[serde(rename = "Relative Absolute Error")]
    pub rae: f64,
    #[serde(rename = "Relative Squared Error")]
    pub rse: f64,
    #[serde(rename = "Coefficient of Determination")]
    pub r2: f64,
    #[serde(rename = "Mean Absolute Error")]
    pub mae: f64,
}

impl EvaluationReport {
    /// `(label, value)` pairs in report order.
    pub fn fields(&self) -> [(&'static str, f64); 5] {
        [
            ("Root Mean Squared Error", self.rmse),
            ("Relative Absolute Error", self.rae),
            ("Relative Squared Error", self.rse),
            ("Coefficient of Determination", self.r2),
            ("Mean Absolute Error", self.mae),
        ]
    }
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (label, value) in self.fields() {
            writeln!(f, "{label:<30}{value:.6}")?;
        }
        Ok(())
    }
}

struct Sums {
    n: f64,
    abs_err: f64,
    sq_err: f64,
    abs_dev: f64,
    sq_dev: f64,
}

fn sums(y: &[f64], y_hat: &[f64]) -> Result<Sums, MetricsError> {
    if y.len() != y_hat.len() {
        return Err(MetricsError::LengthMismatch {
            targets: y.len(),
            predictions: y_hat.len(),
        });
    }
    if y.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let mut s = Sums {
        n,
        abs_err: 0.0,
        sq_err: 0.0,
        abs_dev: 0.0,
        sq_dev: 0.0,
    };
    for (&t, &p) in y.iter().zip(y_hat) {
        let e = t - p;
        let d = t - mean;
        s.abs_err += e.abs();
        s.sq_err += e * e;
        s.abs_dev += d.abs();
        s.sq_dev += d * d;
    }
    Ok(s)
}

/// All five metrics at once.
pub fn evaluate(y: &[f64], y_hat: &[f64]) -> Result<EvaluationReport, MetricsError> {
    let s = sums(y, y_hat)?;
    let mae = s.abs_err / s.n;
    let rmse = (s.sq_err / s.n).sqrt();
    if s.sq_dev == 0.0 {
        return Err(MetricsError::DegenerateVariance { mae, rmse });
    }
    let rse = s.sq_err / s.sq_dev;
    Ok(EvaluationReport {
        rmse,
        rae: s.abs_err / s.abs_dev,
        rse,
        r2: 1.0 - rse,
        mae,
    })
}

pub fn mae(y: &[f64], y_hat: &[f64]) -> Result<f64, MetricsError> {
    let s = sums(y, y_hat)?;
    Ok(s.abs_err / s.n)
}

pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64, MetricsError> {
    let s = sums(y, y_hat)?;
    Ok((s.sq_err / s.n).sqrt())
}

pub fn rae(y: &[f64], y_hat: &[f64]) -> Result<f64, MetricsError> {
    evaluate(y, y_hat).map(|r| r.rae)
}

pub fn rse(y: &[f64], y_hat: &[f64]) -> Result<f64, MetricsError> {
    evaluate(y, y_hat).map(|r| r.rse)
}

pub fn r2(y: &[f64], y_hat: &[f64]) -> Result<f64, MetricsError> {
    evaluate(y, y_hat).map(|r| r.r2)
}
