use super::{check_training_shape, check_width, LearnerError};
use crate::matrix::Matrix;

/// k-nearest-neighbour regressor over z-scored features.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    x: Matrix,
    y: Vec<f64>,
    k: usize,
    means: Vec<f64>,
    stds: Vec<f64>,
}

/// Stores the training set with per-feature population mean and standard
/// deviation. A feature with zero deviation contributes no distance.
pub fn fit_knn(x: &Matrix, y: &[f64], k: usize) -> Result<KnnModel, LearnerError> {
    check_training_shape(x.n_rows(), y.len())?;
    let n = x.n_rows();
    if k < 1 || k > n {
        return Err(LearnerError::KOutOfRange { k, n });
    }
    let p = x.n_cols();
    let mut means = vec![0.0; p];
    let mut stds = vec![0.0; p];
    for j in 0..p {
        let mean = (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (x.get(i, j) - mean).powi(2)).sum::<f64>() / n as f64;
        means[j] = mean;
        stds[j] = var.sqrt();
    }
    Ok(KnnModel {
        x: x.clone(),
        y: y.to_vec(),
        k,
        means,
        stds,
    })
}

impl KnnModel {
    pub(crate) fn from_parts(
        x: Matrix,
        y: Vec<f64>,
        k: usize,
        means: Vec<f64>,
        stds: Vec<f64>,
    ) -> Result<Self, String> {
        let (n, p) = (x.n_rows(), x.n_cols());
        if y.len() != n || means.len() != p || stds.len() != p {
            return Err(format!(
                "knn payload shape mismatch: {n}x{p} matrix, {} targets, {} means, {} stds",
                y.len(),
                means.len(),
                stds.len()
            ));
        }
        if k < 1 || k > n {
            return Err(format!("k = {k} out of range for {n} rows"));
        }
        Ok(KnnModel { x, y, k, means, stds })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn training_matrix(&self) -> &Matrix {
        &self.x
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    pub fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    fn z(&self, j: usize, v: f64) -> f64 {
        if self.stds[j] == 0.0 {
            0.0
        } else {
            (v - self.means[j]) / self.stds[j]
        }
    }

    /// Indices of the k nearest training rows, nearest first; equal
    /// distances go to the lower row index.
    pub fn neighbours(&self, q: &[f64]) -> Result<Vec<usize>, LearnerError> {
        check_width(self.n_features(), q)?;
        let zq: Vec<f64> = q.iter().enumerate().map(|(j, &v)| self.z(j, v)).collect();
        let mut dist: Vec<(f64, usize)> = self
            .x
            .rows()
            .enumerate()
            .map(|(i, row)| {
                let d: f64 = row
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| (self.z(j, v) - zq[j]).powi(2))
                    .sum();
                (d, i)
            })
            .collect();
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, by_distance);
            dist.truncate(self.k);
        }
        dist.sort_by(by_distance);
        Ok(dist.into_iter().map(|(_, i)| i).collect())
    }

    pub fn predict(&self, q: &[f64]) -> Result<f64, LearnerError> {
        let nn = self.neighbours(q)?;
        Ok(nn.iter().map(|&i| self.y[i]).sum::<f64>() / nn.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn k1_returns_exact_match() {
        let x = Matrix::column(&[0.0, 5.0, 9.0]);
        let m = fit_knn(&x, &[1.0, 2.0, 3.0], 1).unwrap();
        assert_eq!(m.predict(&[5.0]).unwrap(), 2.0);
    }

    #[test]
    fn k2_averages_two_nearest() {
        // After z-scoring distances scale uniformly, so ranks are unchanged:
        // neighbours of 0 are at 1 (target 10) and 2 (target 20).
        let x = Matrix::column(&[1.0, 2.0, 10.0]);
        let m = fit_knn(&x, &[10.0, 20.0, 1000.0], 2).unwrap();
        assert_eq!(m.predict(&[0.0]).unwrap(), 15.0);
    }

    #[test]
    fn ties_go_to_lower_index() {
        let x = Matrix::column(&[1.0, -1.0, 5.0]);
        let m = fit_knn(&x, &[10.0, 20.0, 30.0], 1).unwrap();
        assert_eq!(m.neighbours(&[0.0]).unwrap(), vec![0]);
    }

    #[test]
    fn constant_feature_is_ignored() {
        let x = Matrix::new(3, 2, vec![0.0, 7.0, 1.0, 7.0, 2.0, 7.0]).unwrap();
        let m = fit_knn(&x, &[1.0, 2.0, 3.0], 1).unwrap();
        assert_eq!(m.stds()[1], 0.0);
        assert_eq!(m.predict(&[2.0, -1000.0]).unwrap(), 3.0);
    }

    #[test]
    fn k_bounds() {
        let x = Matrix::column(&[0.0, 1.0]);
        assert_eq!(
            fit_knn(&x, &[0.0, 1.0], 0).unwrap_err(),
            LearnerError::KOutOfRange { k: 0, n: 2 }
        );
        assert_eq!(
            fit_knn(&x, &[0.0, 1.0], 3).unwrap_err(),
            LearnerError::KOutOfRange { k: 3, n: 2 }
        );
    }

    fn points() -> impl Strategy<Value = (Matrix, Vec<f64>)> {
        (2usize..25).prop_flat_map(|n| {
            (
                proptest::collection::vec(-100.0f64..100.0, n * 3),
                proptest::collection::vec(-1000.0f64..1000.0, n),
            )
                .prop_map(move |(xs, ys)| (Matrix::new(n, 3, xs).unwrap(), ys))
        })
    }

    proptest! {
        #[test]
        fn k_equals_n_predicts_training_mean((x, y) in points(), q in proptest::collection::vec(-200.0f64..200.0, 3)) {
            let m = fit_knn(&x, &y, y.len()).unwrap();
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let p = m.predict(&q).unwrap();
            prop_assert!((p - mean).abs() <= 1e-9 * mean.abs().max(1.0));
        }

        #[test]
        fn feature_rescaling_keeps_neighbours((x, y) in points(), q in proptest::collection::vec(-200.0f64..200.0, 3), k in 1usize..4) {
            let k = k.min(y.len());
            let scaled_rows: Vec<Vec<f64>> = x.rows().map(|r| vec![r[0] * 1000.0, r[1], r[2]]).collect();
            let xs = Matrix::from_rows(3, &scaled_rows).unwrap();
            let a = fit_knn(&x, &y, k).unwrap();
            let b = fit_knn(&xs, &y, k).unwrap();
            let qs = vec![q[0] * 1000.0, q[1], q[2]];
            // Distances agree to rounding; skip draws with a near-tie at the kth neighbour.
            let mut d: Vec<f64> = x.rows().map(|r| {
                (0..3).map(|j| {
                    let s = a.stds()[j];
                    if s == 0.0 { 0.0 } else { ((r[j] - q[j]) / s).powi(2) }
                }).sum()
            }).collect();
            d.sort_by(f64::total_cmp);
            prop_assume!(k == d.len() || (d[k] - d[k - 1]).abs() > 1e-6 * d[k].max(1.0));
            let mut na = a.neighbours(&q).unwrap();
            let mut nb = b.neighbours(&qs).unwrap();
            na.sort_unstable();
            nb.sort_unstable();
            prop_assert_eq!(na, nb);
        }
    }
}
