use std::collections::BTreeSet;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use super::{parse_date, parse_number, Cell, ColumnKind, ColumnRole, Dataset, DatasetError, Result};
use crate::matrix::Matrix;

/// Month columns encode as whole months elapsed since this (year, month).
pub const MONTH_EPOCH: (i32, u32) = (2019, 1);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoding", rename_all = "snake_case")]
pub enum ColumnEncoding {
    /// One indicator per level, levels sorted lexicographically.
    OneHot {
        levels: Vec<String>,
    },
    Identity,
    MonthIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedColumn {
    pub name: String,
    #[serde(flatten)]
    pub encoding: ColumnEncoding,
}

impl EncodedColumn {
    fn width(&self) -> usize {
        match &self.encoding {
            ColumnEncoding::OneHot { levels } => levels.len(),
            ColumnEncoding::Identity | ColumnEncoding::MonthIndex => 1,
        }
    }
}

/// Maps dataset rows to fixed-width feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub target: String,
    pub columns: Vec<EncodedColumn>,
}

/// Learns the encoding from training data: feature-role columns in schema
/// order, categorical levels collected from the non-missing values.
pub fn fit_encoding(ds: &Dataset) -> Result<EncodingSpec> {
    let target = ds.schema()[ds.target_index()?].name.clone();
    let columns = ds
        .schema()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.role == ColumnRole::Feature)
        .map(|(j, c)| {
            let encoding = match c.kind {
                ColumnKind::Categorical => {
                    let levels: BTreeSet<&str> = ds.rows().iter().filter_map(|r| r[j].as_text()).collect();
                    ColumnEncoding::OneHot {
                        levels: levels.into_iter().map(str::to_string).collect(),
                    }
                }
                ColumnKind::Numeric => ColumnEncoding::Identity,
                ColumnKind::Month => ColumnEncoding::MonthIndex,
            };
            EncodedColumn {
                name: c.name.clone(),
                encoding,
            }
        })
        .collect();
    Ok(EncodingSpec { target, columns })
}

fn months_since_epoch(date: chrono::NaiveDate) -> f64 {
    let (year, month) = MONTH_EPOCH;
    f64::from((date.year() - year) * 12 + date.month() as i32 - month as i32)
}

impl EncodingSpec {
    pub fn width(&self) -> usize {
        self.columns.iter().map(EncodedColumn::width).sum()
    }

    /// Human-readable name of every feature component, e.g. `Model=Model S`.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.width());
        for col in &self.columns {
            match &col.encoding {
                ColumnEncoding::OneHot { levels } => names.extend(levels.iter().map(|l| format!("{}={}", col.name, l))),
                _ => names.push(col.name.clone()),
            }
        }
        names
    }

    /// Encodes one row's cells (looked up through `indices`) into `out`.
    fn encode_row(&self, row: &[Cell], indices: &[usize], row_no: usize, out: &mut Vec<f64>) -> Result<()> {
        for (col, &j) in self.columns.iter().zip(indices) {
            let cell = &row[j];
            match &col.encoding {
                ColumnEncoding::OneHot { levels } => {
                    let start = out.len();
                    out.resize(start + levels.len(), 0.0);
                    // Unknown and missing levels leave the block all-zero.
                    if !cell.is_missing() {
                        if let Ok(pos) = levels.binary_search(&cell.render()) {
                            out[start + pos] = 1.0;
                        }
                    }
                }
                ColumnEncoding::Identity => {
                    let v = match cell {
                        Cell::Number(v) => Some(*v),
                        Cell::Text(s) => parse_number(s),
                        _ => None,
                    };
                    out.push(v.ok_or_else(|| DatasetError::MissingFeature {
                        row: row_no,
                        column: col.name.clone(),
                    })?);
                }
                ColumnEncoding::MonthIndex => {
                    let d = match cell {
                        Cell::Date(d) => Some(*d),
                        Cell::Text(s) => parse_date(s),
                        _ => None,
                    };
                    out.push(months_since_epoch(d.ok_or_else(|| DatasetError::MissingFeature {
                        row: row_no,
                        column: col.name.clone(),
                    })?));
                }
            }
        }
        Ok(())
    }

    fn column_indices(&self, ds: &Dataset) -> Result<Vec<usize>> {
        self.columns.iter().map(|c| ds.require_column(&c.name)).collect()
    }

    /// Feature matrix only; the target column need not be present.
    pub fn encode_features(&self, ds: &Dataset) -> Result<Matrix> {
        let indices = self.column_indices(ds)?;
        let width = self.width();
        let mut data = Vec::with_capacity(ds.n_rows() * width);
        for (i, row) in ds.rows().iter().enumerate() {
            self.encode_row(row, &indices, i, &mut data)?;
        }
        Ok(Matrix::new(ds.n_rows(), width, data).expect("encoded rows have fixed width"))
    }

    /// Feature matrix plus the target vector.
    pub fn encode(&self, ds: &Dataset) -> Result<(Matrix, Vec<f64>)> {
        let x = self.encode_features(ds)?;
        let t = ds.require_column(&self.target)?;
        let y = ds
            .rows()
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r[t].as_number().ok_or_else(|| DatasetError::MissingTarget {
                    row: i,
                    column: self.target.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((x, y))
    }
}
