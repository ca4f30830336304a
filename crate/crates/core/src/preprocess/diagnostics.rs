use nalgebra::{DMatrix, SVD};

use crate::data::ExpressionMatrix;
use crate::error::{Error, Result};
use crate::stats::{median, BoxStats};

/// Relative log expression: per-gene median-centered residuals and their
/// per-sample box statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RleSummary {
    /// Samples × genes residuals `x_ij - median_i(x_.j)`; same mask as the input.
    pub residuals: ExpressionMatrix,
    pub gene_medians: Vec<f64>,
    pub per_sample: Vec<BoxStats>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RleQualityConfig {
    /// Largest acceptable `|median|` of a sample's residuals.
    pub center_tolerance: f64,
    /// Largest acceptable interquartile range (inclusive).
    pub width_max: f64,
}

impl Default for RleQualityConfig {
    fn default() -> Self {
        Self {
            center_tolerance: 0.1,
            width_max: 0.2,
        }
    }
}

fn sample_boxes(x: &ExpressionMatrix) -> Result<Vec<BoxStats>> {
    (0..x.nrows())
        .map(|i| {
            BoxStats::from_values(x.observed_row(i).map(|(_, v)| v)).ok_or_else(|| {
                Error::MissingValues(format!("sample {} has no observed entries", x.sample_ids()[i]))
            })
        })
        .collect()
}

pub fn rle_stats(x: &ExpressionMatrix) -> Result<RleSummary> {
    let gene_medians = (0..x.ncols())
        .map(|j| {
            median(x.observed_column(j).map(|(_, v)| v)).ok_or_else(|| {
                Error::MissingValues(format!("gene {} has no observed entries", x.gene_ids()[j]))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let values = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x.values()[(i, j)] - gene_medians[j]);
    let residuals = x.replace_values(values)?;
    let per_sample = sample_boxes(&residuals)?;
    Ok(RleSummary {
        residuals,
        gene_medians,
        per_sample,
    })
}

/// Per-sample pass flags: centered near zero and narrow enough.
pub fn rle_quality(summary: &RleSummary, cfg: &RleQualityConfig) -> Vec<bool> {
    summary
        .per_sample
        .iter()
        .map(|b| b.median.abs() <= cfg.center_tolerance && b.iqr <= cfg.width_max)
        .collect()
}

/// Box statistics of each sample's raw observed values.
pub fn box_stats(x: &ExpressionMatrix) -> Result<Vec<BoxStats>> {
    sample_boxes(x)
}

/// Principal component scores of the column-centered data.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    /// `n × k` projections onto the leading directions.
    pub scores: DMatrix<f64>,
    /// `p × k` unit directions, largest-magnitude entry positive.
    pub directions: DMatrix<f64>,
    /// Share of total variance along each direction, nonincreasing.
    pub explained: Vec<f64>,
}

pub fn pca_scores(x: &ExpressionMatrix, k: usize) -> Result<Pca> {
    let values = x.require_complete("PCA requires complete data")?;
    let (n, p) = values.shape();
    if k > n.min(p) {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds min(n, p) = {}",
            n.min(p)
        )));
    }
    let mut centered = values.clone();
    for mut c in centered.column_iter_mut() {
        let m = c.mean();
        c.add_scalar_mut(-m);
    }
    let total: f64 = centered.iter().map(|v| v * v).sum();
    if k == 0 {
        return Ok(Pca {
            scores: DMatrix::zeros(n, 0),
            directions: DMatrix::zeros(p, 0),
            explained: Vec::new(),
        });
    }

    let svd = SVD::new(centered.clone(), false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD did not produce right singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut directions = DMatrix::zeros(p, k);
    let mut explained = Vec::with_capacity(k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        let mut v = v_t.row(idx).transpose();
        let lead = v.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if lead < 0.0 {
            v.neg_mut();
        }
        directions.set_column(c, &v);
        let s = svd.singular_values[idx];
        explained.push(if total > 0.0 { s * s / total } else { 0.0 });
    }
    let scores = &centered * &directions;
    Ok(Pca {
        scores,
        directions,
        explained,
    })
}
