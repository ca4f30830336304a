use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::LabelVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnnConfig {
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 3 }
    }
}

/// k-nearest-neighbour classifier; the model is the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub k: usize,
    pub train_x: DMatrix<f64>,
    pub train_y: LabelVector,
}

fn check_finite(x: &DMatrix<f64>) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::MissingValues("KNN requires complete data".into()))
    }
}

impl KnnModel {
    pub fn fit(train_x: DMatrix<f64>, train_y: LabelVector, cfg: KnnConfig) -> Result<Self> {
        if train_x.nrows() != train_y.len() {
            return Err(Error::CountMismatch {
                samples: train_x.nrows(),
                labels: train_y.len(),
            });
        }
        if cfg.k == 0 || cfg.k > train_y.len() {
            return Err(Error::InvalidArgument(format!(
                "k = {} must be in 1..={}",
                cfg.k,
                train_y.len()
            )));
        }
        check_finite(&train_x)?;
        Ok(Self {
            k: cfg.k,
            train_x,
            train_y,
        })
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        Ok(predict_many_k(&self.train_x, &self.train_y, x, &[self.k])?.remove(0))
    }
}

/// Training indices of `query` sorted by distance, ties by index.
fn neighbour_order(train: &DMatrix<f64>, query: &DMatrix<f64>, row: usize) -> Vec<usize> {
    let q = query.row(row);
    let dist: Vec<f64> = train
        .row_iter()
        .map(|t| t.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum())
        .collect();
    let mut order: Vec<usize> = (0..train.nrows()).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    order
}

fn vote(order: &[usize], labels: &LabelVector, k: usize) -> usize {
    let mut counts = vec![0usize; labels.class_count()];
    for &i in &order[..k] {
        counts[labels.labels()[i]] += 1;
    }
    // Strict comparison keeps the smallest label on ties.
    let mut best = 0;
    for (c, &v) in counts.iter().enumerate() {
        if v > counts[best] {
            best = c;
        }
    }
    best
}

/// Predictions for several `k` at once, sharing the distance computation.
pub fn predict_many_k(
    train_x: &DMatrix<f64>,
    train_y: &LabelVector,
    query: &DMatrix<f64>,
    ks: &[usize],
) -> Result<Vec<Vec<usize>>> {
    if query.ncols() != train_x.ncols() {
        return Err(Error::Shape(format!(
            "KNN trained on {} features, query has {}",
            train_x.ncols(),
            query.ncols()
        )));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > train_x.nrows()) {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be in 1..={}",
            train_x.nrows()
        )));
    }
    check_finite(query)?;
    let orders: Vec<Vec<usize>> = (0..query.nrows())
        .into_par_iter()
        .map(|r| neighbour_order(train_x, query, r))
        .collect();
    Ok(ks
        .iter()
        .map(|&k| orders.iter().map(|o| vote(o, train_y, k)).collect())
        .collect())
}

/// Majority vote among the `k` nearest training rows (Euclidean).
pub fn knn_classify(
    train_x: &DMatrix<f64>,
    train_y: &LabelVector,
    cfg: KnnConfig,
    query: &DMatrix<f64>,
) -> Result<Vec<usize>> {
    check_finite(train_x)?;
    Ok(predict_many_k(train_x, train_y, query, &[cfg.k])?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(values.len(), 1, values)
    }

    #[test]
    fn nearest_point() {
        let y = LabelVector::new(vec![0, 1], 2).unwrap();
        let out = knn_classify(&column(&[0.0, 10.0]), &y, KnnConfig { k: 1 }, &column(&[1.0])).unwrap();
        assert_eq!(out, [0]);
    }

    #[test]
    fn vote_tie_goes_to_smaller_label() {
        let y = LabelVector::new(vec![1, 0], 2).unwrap();
        let out = knn_classify(&column(&[0.0, 10.0]), &y, KnnConfig { k: 2 }, &column(&[5.0])).unwrap();
        assert_eq!(out, [0]);
    }

    #[test]
    fn distance_tie_goes_to_lower_index() {
        let y = LabelVector::new(vec![1, 0], 2).unwrap();
        let out = knn_classify(&column(&[0.0, 10.0]), &y, KnnConfig { k: 1 }, &column(&[5.0])).unwrap();
        assert_eq!(out, [1]);
    }

    #[test]
    fn k_equal_to_n_is_majority() {
        let y = LabelVector::new(vec![0, 1, 1], 2).unwrap();
        let out = knn_classify(&column(&[0.0, 5.0, 9.0]), &y, KnnConfig { k: 3 }, &column(&[-100.0, 0.0])).unwrap();
        assert_eq!(out, [1, 1]);
    }

    #[test]
    fn refuses_missing_and_bad_k() {
        let y = LabelVector::new(vec![0, 1], 2).unwrap();
        assert!(knn_classify(&column(&[0.0, f64::NAN]), &y, KnnConfig { k: 1 }, &column(&[1.0])).is_err());
        assert!(knn_classify(&column(&[0.0, 1.0]), &y, KnnConfig { k: 3 }, &column(&[1.0])).is_err());
    }
}
