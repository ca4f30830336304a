//! Samples × features matrices with missing values, class labels and datasets.
//!
//! Samples are rows everywhere. Unobserved cells hold `NaN` in the value
//! matrix and `false` in the mask; nothing in this crate reads them.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// An `n × p` matrix of feature values with an observed-mask and ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    values: DMatrix<f64>,
    observed: DMatrix<bool>,
    gene_ids: Vec<String>,
    sample_ids: Vec<String>,
    complete: bool,
}

fn default_ids(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

impl ExpressionMatrix {
    /// Builds a fully observed matrix.
    pub fn new(
        values: DMatrix<f64>,
        gene_ids: Vec<String>,
        sample_ids: Vec<String>,
    ) -> Result<Self> {
        let observed = DMatrix::from_element(values.nrows(), values.ncols(), true);
        Self::with_mask(values, observed, gene_ids, sample_ids)
    }

    /// Builds a matrix where `observed[(i, j)] == false` marks a missing cell.
    pub fn with_mask(
        mut values: DMatrix<f64>,
        observed: DMatrix<bool>,
        gene_ids: Vec<String>,
        sample_ids: Vec<String>,
    ) -> Result<Self> {
        let (n, p) = values.shape();
        if n == 0 || p == 0 {
            return Err(Error::Shape(format!("matrix must be non-empty, got {n}x{p}")));
        }
        if observed.shape() != (n, p) {
            return Err(Error::Shape(format!(
                "mask is {:?}, values are {n}x{p}",
                observed.shape()
            )));
        }
        if gene_ids.len() != p {
            return Err(Error::Shape(format!("{} gene ids for {p} columns", gene_ids.len())));
        }
        if sample_ids.len() != n {
            return Err(Error::Shape(format!("{} sample ids for {n} rows", sample_ids.len())));
        }
        let mut complete = true;
        for j in 0..p {
            for i in 0..n {
                if observed[(i, j)] {
                    if !values[(i, j)].is_finite() {
                        return Err(Error::NonFinite { row: i, col: j });
                    }
                } else {
                    complete = false;
                    values[(i, j)] = f64::NAN;
                }
            }
        }
        Ok(Self {
            values,
            observed,
            gene_ids,
            sample_ids,
            complete,
        })
    }

    /// Fully observed matrix with generated ids (`g1..`, `s1..`).
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let (n, p) = values.shape();
        Self::new(values, default_ids("g", p), default_ids("s", n))
    }

    /// Row-major construction where `None` is a missing cell.
    pub fn from_rows(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::RaggedRow {
                line: i + 1,
                expected: p,
                found: r.len(),
            });
        }
        let values = DMatrix::from_fn(n, p, |i, j| rows[i][j].unwrap_or(f64::NAN));
        let observed = DMatrix::from_fn(n, p, |i, j| rows[i][j].is_some());
        Self::with_mask(values, observed, default_ids("g", p), default_ids("s", n))
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// Raw values; unobserved cells are `NaN`.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.observed
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.observed[(i, j)]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.observed[(i, j)].then(|| self.values[(i, j)])
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    /// The value matrix, or an error naming `what` when cells are missing.
    pub fn require_complete(&self, what: &str) -> Result<&DMatrix<f64>> {
        if self.complete {
            Ok(&self.values)
        } else {
            Err(Error::MissingValues(what.to_string()))
        }
    }

    /// Observed values of column `j` with their row indices.
    pub fn observed_column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.nrows()).filter_map(move |i| self.get(i, j).map(|v| (i, v)))
    }

    /// Observed values of row `i` with their column indices.
    pub fn observed_row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.ncols()).filter_map(move |j| self.get(i, j).map(|v| (j, v)))
    }

    /// Applies `f` to every observed cell; the mask is unchanged.
    pub fn map_observed(&self, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        let values = DMatrix::from_fn(self.nrows(), self.ncols(), |i, j| {
            if self.observed[(i, j)] {
                f(self.values[(i, j)])
            } else {
                f64::NAN
            }
        });
        self.replace_values(values)
    }

    /// Same mask and ids, new values.
    pub(crate) fn replace_values(&self, values: DMatrix<f64>) -> Result<Self> {
        Self::with_mask(
            values,
            self.observed.clone(),
            self.gene_ids.clone(),
            self.sample_ids.clone(),
        )
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let n = self.nrows();
        Self {
            values: DMatrix::from_fn(n, cols.len(), |i, k| self.values[(i, cols[k])]),
            observed: DMatrix::from_fn(n, cols.len(), |i, k| self.observed[(i, cols[k])]),
            gene_ids: cols.iter().map(|&c| self.gene_ids[c].clone()).collect(),
            sample_ids: self.sample_ids.clone(),
            complete: cols
                .iter()
                .all(|&c| (0..n).all(|i| self.observed[(i, c)])),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let p = self.ncols();
        Self {
            values: DMatrix::from_fn(rows.len(), p, |k, j| self.values[(rows[k], j)]),
            observed: DMatrix::from_fn(rows.len(), p, |k, j| self.observed[(rows[k], j)]),
            gene_ids: self.gene_ids.clone(),
            sample_ids: rows.iter().map(|&r| self.sample_ids[r].clone()).collect(),
            complete: rows
                .iter()
                .all(|&r| (0..p).all(|j| self.observed[(r, j)])),
        }
    }

    /// Marks a cell as missing.
    pub fn mask_cell(&mut self, i: usize, j: usize) {
        self.observed[(i, j)] = false;
        self.values[(i, j)] = f64::NAN;
        self.complete = false;
    }

    /// Swaps samples and genes.
    pub fn transposed(&self) -> Self {
        Self {
            values: self.values.transpose(),
            observed: self.observed.transpose(),
            gene_ids: self.sample_ids.clone(),
            sample_ids: self.gene_ids.clone(),
            complete: self.complete,
        }
    }
}

/// Class labels `0..C`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    class_count: usize,
}

impl LabelVector {
    /// Validates that every label is below `class_count`, that `class_count >= 2`
    /// and that every class occurs.
    pub fn new(labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 classes, got {class_count}"
            )));
        }
        let mut counts = vec![0usize; class_count];
        for &l in &labels {
            if l >= class_count {
                return Err(Error::InvalidArgument(format!(
                    "label {l} out of range for {class_count} classes"
                )));
            }
            counts[l] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyClass(empty));
        }
        Ok(Self {
            labels,
            class_count,
        })
    }

    /// Infers the class count as `max + 1`.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let c = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(labels, c)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Subset keeping the class count; fails if a class disappears.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        Self::new(rows.iter().map(|&r| self.labels[r]).collect(), self.class_count)
    }
}

/// Feature matrix paired with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: ExpressionMatrix,
    pub y: LabelVector,
    /// Original spelling of each class label, indexed by class.
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: ExpressionMatrix, y: LabelVector) -> Result<Self> {
        let class_names = (0..y.class_count()).map(|c| c.to_string()).collect();
        Self::with_class_names(x, y, class_names)
    }

    pub fn with_class_names(
        x: ExpressionMatrix,
        y: LabelVector,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::CountMismatch {
                samples: x.nrows(),
                labels: y.len(),
            });
        }
        if class_names.len() != y.class_count() {
            return Err(Error::Shape(format!(
                "{} class names for {} classes",
                class_names.len(),
                y.class_count()
            )));
        }
        Ok(Self { x, y, class_names })
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_genes(&self) -> usize {
        self.x.ncols()
    }

    pub fn class_count(&self) -> usize {
        self.y.class_count()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        Ok(Self {
            x: self.x.select_rows(rows),
            y: self.y.select(rows)?,
            class_names: self.class_names.clone(),
        })
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            x: self.x.select_columns(cols),
            y: self.y.clone(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn with_x(&self, x: ExpressionMatrix) -> Result<Self> {
        Self::with_class_names(x, self.y.clone(), self.class_names.clone())
    }
}

/// Subtracts each column's mean over its observed entries.
///
/// Returns the centered matrix and the means, for applying to new samples.
pub fn center_columns(x: &ExpressionMatrix) -> Result<(ExpressionMatrix, Vec<f64>)> {
    let means = column_means(x)?;
    let values = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x.values()[(i, j)] - means[j]);
    Ok((x.replace_values(values)?, means))
}

/// Means over observed entries; errors on a fully missing column.
pub fn column_means(x: &ExpressionMatrix) -> Result<Vec<f64>> {
    (0..x.ncols())
        .map(|j| {
            let (sum, count) = x
                .observed_column(j)
                .fold((0.0, 0usize), |(s, c), (_, v)| (s + v, c + 1));
            if count == 0 {
                Err(Error::MissingValues(format!(
                    "column {} ({}) has no observed entries",
                    j,
                    x.gene_ids()[j]
                )))
            } else {
                Ok(sum / count as f64)
            }
        })
        .collect()
}
