//! Tabular data: column schema, cells, and the preprocessing modules that
//! operate on whole datasets.
//!
//! A [`Dataset`] is immutable once built. Every preprocessing operation
//! (`add_rows`, `select_columns`, `clean_missing`, `edit_metadata`,
//! `split_data`) takes datasets by reference and returns new ones.

mod csv_io;
mod encoding;
mod ops;
mod stats;
mod synth;

pub use csv_io::{parse_csv, to_csv};
pub use encoding::{fit_encoding, ColumnEncoding, EncodedColumn, EncodingSpec, MONTH_EPOCH};
pub use ops::{add_rows, clean_missing, edit_metadata, partition_by_month, select_columns, split_data};
pub use stats::{summarize, DatasetStats};
pub use synth::{synthesize, MODEL_CATALOG};

use std::collections::HashSet;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Column name of the prediction appended by scoring.
pub const SCORED_LABELS: &str = "Scored Labels";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("datasets need to be same: column `{column}` differs")]
    SchemaMismatch { column: String },
    #[error("unknown column `{name}`; available columns: {}", available.join(", "))]
    UnknownColumn { name: String, available: Vec<String> },
    #[error("split fraction {0} is outside [0, 1]")]
    InvalidFraction(f64),
    #[error("row {row}: required feature `{column}` is missing or not a valid value")]
    MissingFeature { row: usize, column: String },
    #[error("row {row}: target `{column}` is missing")]
    MissingTarget { row: usize, column: String },
    #[error("dataset needs exactly one target column, found {0}")]
    TargetCount(usize),
    #[error("column `{0}` has no non-missing values")]
    NoValues(String),
    #[error("invalid dataset: {0}")]
    Shape(String),
    #[error("invalid vehicle record: {0}")]
    InvalidRecord(String),
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Categorical,
    Numeric,
    /// Calendar date (`YYYY-MM-DD`), used at month resolution.
    Month,
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnKind::Categorical => "categorical",
            ColumnKind::Numeric => "numeric",
            ColumnKind::Month => "month",
        })
    }
}

impl std::str::FromStr for ColumnKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "categorical" => Ok(ColumnKind::Categorical),
            "numeric" => Ok(ColumnKind::Numeric),
            "month" => Ok(ColumnKind::Month),
            other => Err(format!(
                "unknown column kind `{other}` (expected categorical, numeric or month)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Feature,
    Target,
    Passthrough,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
    #[serde(default = "default_true")]
    pub missing_allowed: bool,
}

fn default_true() -> bool {
    true
}

impl ColumnSchema {
    pub fn new(name: impl Into<String>, kind: ColumnKind, role: ColumnRole) -> Self {
        ColumnSchema {
            name: name.into(),
            kind,
            role,
            missing_allowed: true,
        }
    }

    /// Default schema entry for a header name, before any value-based
    /// inference. `None` means the kind has to be inferred from the values.
    pub(crate) fn default_kind_for(name: &str) -> Option<ColumnKind> {
        match name {
            "Price" | "Miles" | "Year" => Some(ColumnKind::Numeric),
            "Date" => Some(ColumnKind::Month),
            "Model" | "Battery" => Some(ColumnKind::Categorical),
            _ => None,
        }
    }

    pub(crate) fn default_role_for(name: &str) -> ColumnRole {
        match name {
            "Price" => ColumnRole::Target,
            "Date" | SCORED_LABELS => ColumnRole::Passthrough,
            _ => ColumnRole::Feature,
        }
    }
}

/// One cell of a dataset row.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Missing,
    Text(String),
    Number(f64),
    Date(NaiveDate),
}

impl Cell {
    /// Parses raw field text under `kind`. Empty text is `Missing`;
    /// `None` means the text is not a valid value of that kind.
    pub fn parse(raw: &str, kind: ColumnKind) -> Option<Cell> {
        if raw.is_empty() {
            return Some(Cell::Missing);
        }
        match kind {
            ColumnKind::Categorical => Some(Cell::Text(raw.to_string())),
            ColumnKind::Numeric => parse_number(raw).map(Cell::Number),
            ColumnKind::Month => parse_date(raw).map(Cell::Date),
        }
    }

    /// Field text for this cell; the inverse of [`Cell::parse`].
    pub fn render(&self) -> String {
        match self {
            Cell::Missing => String::new(),
            Cell::Text(s) => s.clone(),
            Cell::Number(v) => v.to_string(),
            Cell::Date(d) => d.format("%Y-%m-%d").to_string(),
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    fn matches_kind(&self, kind: ColumnKind) -> bool {
        matches!(
            (self, kind),
            (Cell::Missing, _)
                | (Cell::Text(_), ColumnKind::Categorical)
                | (Cell::Number(_), ColumnKind::Numeric)
                | (Cell::Date(_), ColumnKind::Month)
        )
    }
}

pub(crate) fn parse_number(raw: &str) -> Option<f64> {
    raw.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

pub(crate) fn parse_date(raw: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d").ok()
}

/// Ordered rows under a column schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Vec<ColumnSchema>,
    rows: Vec<Vec<Cell>>,
}

impl Dataset {
    /// Builds a dataset, checking name uniqueness, row width and cell kinds.
    pub fn new(schema: Vec<ColumnSchema>, rows: Vec<Vec<Cell>>) -> Result<Self> {
        check_unique_names(&schema)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(DatasetError::Shape(format!(
                    "row {i} has {} cells, schema has {} columns",
                    row.len(),
                    schema.len()
                )));
            }
            for (cell, col) in row.iter().zip(&schema) {
                if !cell.matches_kind(col.kind) {
                    return Err(DatasetError::Shape(format!(
                        "row {i}: cell {cell:?} does not match {} column `{}`",
                        col.kind, col.name
                    )));
                }
                if cell.is_missing() && !col.missing_allowed {
                    return Err(DatasetError::Shape(format!(
                        "row {i}: column `{}` does not allow missing values",
                        col.name
                    )));
                }
            }
        }
        Ok(Dataset { schema, rows })
    }

    pub fn empty(schema: Vec<ColumnSchema>) -> Result<Self> {
        Dataset::new(schema, Vec::new())
    }

    pub(crate) fn from_parts_unchecked(schema: Vec<ColumnSchema>, rows: Vec<Vec<Cell>>) -> Self {
        Dataset { schema, rows }
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.schema.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    pub fn require_column(&self, name: &str) -> Result<usize> {
        self.column_index(name).ok_or_else(|| DatasetError::UnknownColumn {
            name: name.to_string(),
            available: self.column_names(),
        })
    }

    pub fn column(&self, name: &str) -> Result<impl Iterator<Item = &Cell>> {
        let idx = self.require_column(name)?;
        Ok(self.rows.iter().map(move |r| &r[idx]))
    }

    /// The single target column, if the dataset is trainable.
    pub fn target_index(&self) -> Result<usize> {
        let targets: Vec<usize> = self
            .schema
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == ColumnRole::Target)
            .map(|(i, _)| i)
            .collect();
        match targets.as_slice() {
            [one] => Ok(*one),
            other => Err(DatasetError::TargetCount(other.len())),
        }
    }

    /// Returns a copy with `name`'s role replaced.
    pub fn with_role(&self, name: &str, role: ColumnRole) -> Result<Dataset> {
        let idx = self.require_column(name)?;
        let mut schema = self.schema.clone();
        schema[idx].role = role;
        Ok(Dataset {
            schema,
            rows: self.rows.clone(),
        })
    }

    /// Rows for which `keep` returns true, in order.
    pub fn filter_rows(&self, mut keep: impl FnMut(&[Cell]) -> bool) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }

    /// Appends a numeric passthrough column.
    pub fn with_numeric_column(&self, name: &str, values: &[f64]) -> Result<Dataset> {
        if values.len() != self.rows.len() {
            return Err(DatasetError::Shape(format!(
                "{} values for {} rows",
                values.len(),
                self.rows.len()
            )));
        }
        if self.column_index(name).is_some() {
            return Err(DatasetError::DuplicateColumn(name.to_string()));
        }
        let mut schema = self.schema.clone();
        schema.push(ColumnSchema::new(name, ColumnKind::Numeric, ColumnRole::Passthrough));
        let rows = self
            .rows
            .iter()
            .zip(values)
            .map(|(r, v)| {
                let mut r = r.clone();
                r.push(Cell::Number(*v));
                r
            })
            .collect();
        Ok(Dataset { schema, rows })
    }

    pub fn from_records(records: &[VehicleRecord]) -> Result<Dataset> {
        let with_date = records.iter().any(|r| r.date.is_some());
        let schema = vehicle_schema(with_date);
        let mut rows = Vec::with_capacity(records.len());
        for r in records {
            r.validate()?;
            rows.push(r.to_row(with_date));
        }
        Dataset::new(schema, rows)
    }
}

pub(crate) fn check_unique_names(schema: &[ColumnSchema]) -> Result<()> {
    let mut seen = HashSet::new();
    for c in schema {
        if !seen.insert(c.name.as_str()) {
            return Err(DatasetError::DuplicateColumn(c.name.clone()));
        }
    }
    Ok(())
}

/// `Model,Year,Battery,Price,Miles[,Date]` with default kinds and roles.
pub fn vehicle_schema(with_date: bool) -> Vec<ColumnSchema> {
    let mut names = vec!["Model", "Year", "Battery", "Price", "Miles"];
    if with_date {
        names.push("Date");
    }
    names
        .into_iter()
        .map(|n| {
            ColumnSchema::new(
                n,
                ColumnSchema::default_kind_for(n).unwrap_or(ColumnKind::Categorical),
                ColumnSchema::default_role_for(n),
            )
        })
        .collect()
}

/// One used-vehicle listing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub model: String,
    pub year: i32,
    pub battery: String,
    pub price: Option<f64>,
    pub miles: f64,
    pub date: Option<NaiveDate>,
}

impl VehicleRecord {
    pub fn validate(&self) -> Result<()> {
        if !(1000..=9999).contains(&self.year) {
            return Err(DatasetError::InvalidRecord(format!(
                "year {} is not a 4-digit year",
                self.year
            )));
        }
        if !(self.miles.is_finite() && self.miles >= 0.0) {
            return Err(DatasetError::InvalidRecord(format!(
                "miles {} must be non-negative",
                self.miles
            )));
        }
        if let Some(p) = self.price {
            if !(p.is_finite() && p >= 0.0) {
                return Err(DatasetError::InvalidRecord(format!("price {p} must be non-negative")));
            }
        }
        Ok(())
    }

    fn to_row(&self, with_date: bool) -> Vec<Cell> {
        let mut row = vec![
            Cell::Text(self.model.clone()),
            Cell::Number(f64::from(self.year)),
            Cell::Text(self.battery.clone()),
            self.price.map_or(Cell::Missing, Cell::Number),
            Cell::Number(self.miles),
        ];
        if with_date {
            row.push(self.date.map_or(Cell::Missing, Cell::Date));
        }
        row
    }
}
