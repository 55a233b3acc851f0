use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_unique_names, Cell, ColumnKind, Dataset, DatasetError, Result};

/// Rows of `a` followed by rows of `b`. Column names, kinds and order must
/// agree; the output keeps `a`'s schema.
pub fn add_rows(a: &Dataset, b: &Dataset) -> Result<Dataset> {
    let (sa, sb) = (a.schema(), b.schema());
    for i in 0..sa.len().max(sb.len()) {
        match (sa.get(i), sb.get(i)) {
            (Some(x), Some(y)) if x.name == y.name && x.kind == y.kind => {}
            (Some(x), _) => return Err(DatasetError::SchemaMismatch { column: x.name.clone() }),
            (None, Some(y)) => return Err(DatasetError::SchemaMismatch { column: y.name.clone() }),
            (None, None) => unreachable!(),
        }
    }
    let mut rows = a.rows().to_vec();
    rows.extend_from_slice(b.rows());
    Ok(Dataset::from_parts_unchecked(sa.to_vec(), rows))
}

/// Projects (and reorders) columns to `names`.
pub fn select_columns<S: AsRef<str>>(ds: &Dataset, names: &[S]) -> Result<Dataset> {
    let indices = names
        .iter()
        .map(|n| ds.require_column(n.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let schema: Vec<_> = indices.iter().map(|&i| ds.schema()[i].clone()).collect();
    check_unique_names(&schema)?;
    let rows = ds
        .rows()
        .iter()
        .map(|r| indices.iter().map(|&i| r[i].clone()).collect())
        .collect();
    Ok(Dataset::from_parts_unchecked(schema, rows))
}

/// Drops every row that has at least one missing cell. Returns the cleaned
/// dataset and the number of dropped rows.
pub fn clean_missing(ds: &Dataset) -> (Dataset, usize) {
    let cleaned = ds.filter_rows(|r| !r.iter().any(Cell::is_missing));
    let dropped = ds.n_rows() - cleaned.n_rows();
    (cleaned, dropped)
}

/// Changes a column's kind, re-parsing its values. Values that do not parse
/// under the new kind become missing.
pub fn edit_metadata(ds: &Dataset, column: &str, new_kind: ColumnKind) -> Result<Dataset> {
    let idx = ds.require_column(column)?;
    if ds.schema()[idx].kind == new_kind {
        return Ok(ds.clone());
    }
    let mut schema = ds.schema().to_vec();
    schema[idx].kind = new_kind;
    schema[idx].missing_allowed = true;
    let rows = ds
        .rows()
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r[idx] = Cell::parse(&r[idx].render(), new_kind).unwrap_or(Cell::Missing);
            r
        })
        .collect();
    Ok(Dataset::from_parts_unchecked(schema, rows))
}

/// Randomized two-way split.
///
/// Row indices are shuffled with a Fisher-Yates pass driven by ChaCha8
/// seeded from `seed`; the first `floor(fraction * n + 0.5)` shuffled rows
/// form the first output. Both outputs keep the input's relative row order.
pub fn split_data(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(DatasetError::InvalidFraction(fraction));
    }
    let n = ds.n_rows();
    let left_len = ((fraction * n as f64 + 0.5).floor() as usize).min(n);

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut in_left = vec![false; n];
    for &i in &order[..left_len] {
        in_left[i] = true;
    }
    let (mut left, mut right) = (Vec::with_capacity(left_len), Vec::with_capacity(n - left_len));
    for (row, goes_left) in ds.rows().iter().zip(in_left) {
        if goes_left {
            left.push(row.clone());
        } else {
            right.push(row.clone());
        }
    }
    let schema = ds.schema().to_vec();
    Ok((
        Dataset::from_parts_unchecked(schema.clone(), left),
        Dataset::from_parts_unchecked(schema, right),
    ))
}

/// Rows grouped by the calendar month of a date column, keyed by the
/// lowercase month abbreviation (`"jan"`, `"feb"`, ...). Years are not
/// distinguished. Every row must have a date.
pub fn partition_by_month(ds: &Dataset, column: &str) -> Result<BTreeMap<String, Dataset>> {
    let idx = ds.require_column(column)?;
    let mut groups: BTreeMap<String, Vec<Vec<Cell>>> = BTreeMap::new();
    for (i, row) in ds.rows().iter().enumerate() {
        let Cell::Date(d) = &row[idx] else {
            return Err(DatasetError::MissingFeature {
                row: i,
                column: column.to_string(),
            });
        };
        let key = d.format("%b").to_string().to_lowercase();
        groups.entry(key).or_default().push(row.clone());
    }
    Ok(groups
        .into_iter()
        .map(|(k, rows)| (k, Dataset::from_parts_unchecked(ds.schema().to_vec(), rows)))
        .collect())
}
