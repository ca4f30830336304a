//! Microarray preprocessing: thresholding, fold/span filtering, log
//! transform and standardization, plus exploratory diagnostics.
//!
//! The stages run in the order [`threshold_clip`] → [`filter_genes`] →
//! [`log_transform`] → standardization. [`Preprocessor`] fits the only
//! data-dependent decisions (which genes survive, per-gene scaling) on
//! training samples and applies them frozen to new samples.

mod diagnostics;

pub use diagnostics::{
    box_stats, pca_scores, rle_quality, rle_stats, Pca, RleQualityConfig, RleSummary,
};

use nalgebra::DMatrix;

use crate::data::ExpressionMatrix;
use crate::error::{Error, Result};

/// How expression values are standardized after the log transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Standardization {
    Off,
    /// Each sample (row) to mean 0, sample sd 1.
    PerSample,
    /// Each gene (column) to mean 0, sample sd 1, using training statistics.
    PerGene,
}

impl std::str::FromStr for Standardization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" | "none" => Ok(Self::Off),
            "sample" | "samples" => Ok(Self::PerSample),
            "gene" | "genes" => Ok(Self::PerGene),
            _ => Err(Error::InvalidArgument(format!("unknown standardization {s:?}"))),
        }
    }
}

impl std::fmt::Display for Standardization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Off => "off",
            Self::PerSample => "sample",
            Self::PerGene => "gene",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessConfig {
    pub floor: f64,
    pub ceil: f64,
    /// A gene needs `max / min > fold_min`.
    pub fold_min: f64,
    /// A gene needs `max - min > span_min`.
    pub span_min: f64,
    pub log_base: f64,
    pub standardize: Standardization,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            floor: 100.0,
            ceil: 16000.0,
            fold_min: 5.0,
            span_min: 500.0,
            log_base: 10.0,
            standardize: Standardization::PerSample,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.floor > 0.0
            && self.floor < self.ceil
            && self.fold_min > 0.0
            && self.span_min > 0.0
            && self.log_base > 1.0
            && [self.floor, self.ceil, self.fold_min, self.span_min, self.log_base]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "preprocess config needs 0 < floor < ceil, fold_min > 0, span_min > 0, log_base > 1: {self:?}"
            )))
        }
    }
}

/// Clamps every observed entry into `[floor, ceil]`.
pub fn threshold_clip(x: &ExpressionMatrix, cfg: &PreprocessConfig) -> Result<ExpressionMatrix> {
    cfg.validate()?;
    x.map_observed(|v| v.clamp(cfg.floor, cfg.ceil))
}

/// Indices of genes with `max/min > fold_min` and `max - min > span_min`
/// over their observed entries.
pub fn filter_decisions(x: &ExpressionMatrix, cfg: &PreprocessConfig) -> Vec<usize> {
    (0..x.ncols())
        .filter(|&j| {
            let (lo, hi) = x
                .observed_column(j)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, v)| {
                    (lo.min(v), hi.max(v))
                });
            lo.is_finite() && lo > 0.0 && hi / lo > cfg.fold_min && hi - lo > cfg.span_min
        })
        .collect()
}

/// Drops genes failing the fold/span rule. Surviving values are untouched.
pub fn filter_genes(
    x: &ExpressionMatrix,
    cfg: &PreprocessConfig,
) -> Result<(ExpressionMatrix, Vec<usize>)> {
    cfg.validate()?;
    let kept = filter_decisions(x, cfg);
    if kept.is_empty() {
        return Err(Error::EmptyFilter);
    }
    Ok((x.select_columns(&kept), kept))
}

pub fn log_transform(x: &ExpressionMatrix, cfg: &PreprocessConfig) -> Result<ExpressionMatrix> {
    cfg.validate()?;
    for j in 0..x.ncols() {
        if let Some((i, v)) = x.observed_column(j).find(|&(_, v)| v <= 0.0) {
            return Err(Error::NonPositive {
                row: i,
                col: j,
                value: v,
            });
        }
    }
    let ln_base = cfg.log_base.ln();
    x.map_observed(|v| if cfg.log_base == 10.0 { v.log10() } else { v.ln() / ln_base })
}

fn mean_sd(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let values: Vec<f64> = values.collect();
    let n = values.len();
    if n < 2 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some((mean, var.sqrt()))
}

/// Scales each sample to mean 0 and unit sample standard deviation (divisor `n - 1`).
pub fn standardize_samples(x: &ExpressionMatrix) -> Result<ExpressionMatrix> {
    let mut values = x.values().clone();
    for i in 0..x.nrows() {
        let (mean, sd) = mean_sd(x.observed_row(i).map(|(_, v)| v))
            .filter(|&(_, sd)| sd > 0.0)
            .ok_or_else(|| {
                Error::ZeroVariance(format!("sample {} ({})", i, x.sample_ids()[i]))
            })?;
        values.row_mut(i).iter_mut().for_each(|v| *v = (*v - mean) / sd);
    }
    x.replace_values(values)
}

/// Per-gene mean and sample sd over observed entries.
pub fn gene_scaling(x: &ExpressionMatrix) -> Result<Vec<(f64, f64)>> {
    (0..x.ncols())
        .map(|j| {
            mean_sd(x.observed_column(j).map(|(_, v)| v))
                .filter(|&(_, sd)| sd > 0.0)
                .ok_or_else(|| Error::ZeroVariance(format!("gene {} ({})", j, x.gene_ids()[j])))
        })
        .collect()
}

pub fn apply_gene_scaling(x: &ExpressionMatrix, scaling: &[(f64, f64)]) -> Result<ExpressionMatrix> {
    if scaling.len() != x.ncols() {
        return Err(Error::Shape(format!(
            "{} gene scalings for {} genes",
            scaling.len(),
            x.ncols()
        )));
    }
    let values = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
        let (m, s) = scaling[j];
        (x.values()[(i, j)] - m) / s
    });
    x.replace_values(values)
}

/// Preprocessing decisions learned from training samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessor {
    pub config: PreprocessConfig,
    /// Genes of the raw input that survive filtering.
    pub kept: Vec<usize>,
    /// Training-set per-gene scaling, for [`Standardization::PerGene`].
    pub gene_scaling: Option<Vec<(f64, f64)>>,
    /// Gene count of the raw input.
    pub input_genes: usize,
}

impl Preprocessor {
    pub fn fit(train: &ExpressionMatrix, config: &PreprocessConfig) -> Result<Self> {
        let clipped = threshold_clip(train, config)?;
        let (filtered, kept) = filter_genes(&clipped, config)?;
        let gene_scaling = match config.standardize {
            Standardization::PerGene => Some(gene_scaling(&log_transform(&filtered, config)?)?),
            _ => None,
        };
        Ok(Self {
            config: *config,
            kept,
            gene_scaling,
            input_genes: train.ncols(),
        })
    }

    pub fn apply(&self, x: &ExpressionMatrix) -> Result<ExpressionMatrix> {
        if x.ncols() != self.input_genes {
            return Err(Error::Shape(format!(
                "preprocessor fitted on {} genes, input has {}",
                self.input_genes,
                x.ncols()
            )));
        }
        let clipped = threshold_clip(x, &self.config)?;
        let logged = log_transform(&clipped.select_columns(&self.kept), &self.config)?;
        match (self.config.standardize, &self.gene_scaling) {
            (Standardization::Off, _) => Ok(logged),
            (Standardization::PerSample, _) => standardize_samples(&logged),
            (Standardization::PerGene, Some(s)) => apply_gene_scaling(&logged, s),
            (Standardization::PerGene, None) => Err(Error::InvalidArgument(
                "per-gene standardization without fitted scaling".into(),
            )),
        }
    }
}

/// Runs the whole pipeline on one matrix, returning kept gene indices too.
pub fn preprocess(x: &ExpressionMatrix, config: &PreprocessConfig) -> Result<(ExpressionMatrix, Vec<usize>)> {
    let p = Preprocessor::fit(x, config)?;
    let out = p.apply(x)?;
    Ok((out, p.kept))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_gene(values: &[f64]) -> ExpressionMatrix {
        let rows: Vec<_> = values.iter().map(|&v| vec![Some(v)]).collect();
        ExpressionMatrix::from_rows(&rows).unwrap()
    }

    fn row(values: &[f64]) -> ExpressionMatrix {
        ExpressionMatrix::from_rows(&[values.iter().map(|&v| Some(v)).collect()]).unwrap()
    }

    #[test]
    fn clip_examples() {
        let cfg = PreprocessConfig::default();
        let out = threshold_clip(&one_gene(&[50.0, 20000.0, 5000.0]), &cfg).unwrap();
        let col: Vec<_> = out.observed_column(0).map(|(_, v)| v).collect();
        assert_eq!(col, [100.0, 16000.0, 5000.0]);
    }

    #[test]
    fn clip_keeps_mask() {
        let x = ExpressionMatrix::from_rows(&[vec![Some(1.0), None]]).unwrap();
        let out = threshold_clip(&x, &PreprocessConfig::default()).unwrap();
        assert_eq!(out.mask(), x.mask());
    }

    #[test]
    fn filter_examples() {
        let cfg = PreprocessConfig::default();
        let x = ExpressionMatrix::from_rows(&[
            vec![Some(100.0), Some(100.0), Some(1000.0)],
            vec![Some(601.0), Some(600.0), Some(4000.0)],
        ])
        .unwrap();
        let (kept, idx) = filter_genes(&x, &cfg).unwrap();
        assert_eq!(idx, [0]);
        assert_eq!(kept.get(1, 0), Some(601.0));
    }

    #[test]
    fn empty_filter_result() {
        let cfg = PreprocessConfig::default();
        assert!(matches!(
            filter_genes(&one_gene(&[100.0, 200.0]), &cfg),
            Err(Error::EmptyFilter)
        ));
    }

    #[test]
    fn log10_examples() {
        let cfg = PreprocessConfig::default();
        let out = log_transform(&one_gene(&[100.0, 16000.0, 1.0]), &cfg).unwrap();
        assert_eq!(out.get(0, 0), Some(2.0));
        assert!((out.get(1, 0).unwrap() - 4.204_119_982_655_925).abs() < 1e-12);
        assert_eq!(out.get(2, 0), Some(0.0));
    }

    #[test]
    fn log_rejects_nonpositive() {
        let err = log_transform(&one_gene(&[1.0, 0.0]), &PreprocessConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonPositive { row: 1, col: 0, .. }));
    }

    #[test]
    fn other_log_base() {
        let cfg = PreprocessConfig {
            log_base: 2.0,
            ..Default::default()
        };
        let out = log_transform(&one_gene(&[8.0]), &cfg).unwrap();
        assert!((out.get(0, 0).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn standardize_row() {
        let out = standardize_samples(&row(&[1.0, 2.0, 3.0])).unwrap();
        let r: Vec<_> = out.observed_row(0).map(|(_, v)| v).collect();
        assert_eq!(r, [-1.0, 0.0, 1.0]);
    }

    #[test]
    fn standardize_rejects_constant_row() {
        assert!(matches!(
            standardize_samples(&row(&[5.0, 5.0])),
            Err(Error::ZeroVariance(_))
        ));
    }

    #[test]
    fn standardize_is_idempotent() {
        let once = standardize_samples(&row(&[0.3, 9.0, -2.0, 4.5])).unwrap();
        let twice = standardize_samples(&once).unwrap();
        for j in 0..4 {
            assert!((once.get(0, j).unwrap() - twice.get(0, j).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn invalid_config() {
        let cfg = PreprocessConfig {
            floor: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn preprocessor_applies_training_filter_to_new_samples() {
        let train = ExpressionMatrix::from_rows(&[
            vec![Some(100.0), Some(200.0), Some(50.0)],
            vec![Some(5000.0), Some(300.0), Some(700.0)],
            vec![Some(900.0), Some(250.0), Some(20000.0)],
        ])
        .unwrap();
        let cfg = PreprocessConfig {
            standardize: Standardization::Off,
            ..Default::default()
        };
        let p = Preprocessor::fit(&train, &cfg).unwrap();
        assert_eq!(p.kept, [0, 2]);
        let test = ExpressionMatrix::from_rows(&[vec![Some(1000.0), Some(1.0), Some(10.0)]]).unwrap();
        let out = p.apply(&test).unwrap();
        assert_eq!(out.ncols(), 2);
        assert_eq!(out.get(0, 0), Some(3.0));
        assert_eq!(out.get(0, 1), Some(2.0));
    }
}
