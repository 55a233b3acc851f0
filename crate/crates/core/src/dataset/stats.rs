use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::{Cell, Dataset, DatasetError, Result};

/// Price summary of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    /// Number of rows with a price.
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Most frequent price; ties go to the smallest value.
    pub mode: f64,
    /// Mean price per `Model` level (empty without a `Model` column).
    pub per_model_mean: BTreeMap<String, f64>,
}

pub fn summarize(ds: &Dataset) -> Result<DatasetStats> {
    let price = ds.require_column("Price")?;
    let model = ds.column_index("Model");

    let mut prices = Vec::new();
    let mut groups: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for row in ds.rows() {
        let Some(p) = row[price].as_number() else { continue };
        prices.push(p);
        if let Some(Cell::Text(m)) = model.map(|j| &row[j]) {
            let e = groups.entry(m.clone()).or_insert((0.0, 0));
            e.0 += p;
            e.1 += 1;
        }
    }
    if prices.is_empty() {
        return Err(DatasetError::NoValues("Price".into()));
    }

    let n = prices.len();
    let mean = prices.iter().sum::<f64>() / n as f64;
    prices.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        prices[n / 2]
    } else {
        (prices[n / 2 - 1] + prices[n / 2]) / 2.0
    };

    // Sorted ascending, so the first run of maximal length is the smallest mode.
    let (mut mode, mut best_run) = (prices[0], 0);
    let mut i = 0;
    while i < n {
        let run = prices[i..].iter().take_while(|&&p| p == prices[i]).count();
        if run > best_run {
            mode = prices[i];
            best_run = run;
        }
        i += run;
    }

    Ok(DatasetStats {
        count: n,
        mean,
        median,
        mode,
        per_model_mean: groups.into_iter().map(|(m, (sum, k))| (m, sum / k as f64)).collect(),
    })
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Count   {}", self.count)?;
        writeln!(f, "Mean    {:.2}", self.mean)?;
        writeln!(f, "Median  {}", self.median)?;
        writeln!(f, "Mode    {}", self.mode)?;
        if !self.per_model_mean.is_empty() {
            writeln!(f)?;
            writeln!(f, "Average price based on models")?;
            for (model, mean) in &self.per_model_mean {
                writeln!(f, "{model:<14}{mean:.2}")?;
            }
        }
        Ok(())
    }
}
