//! Seeded two-class Gaussian data with a known set of informative genes.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{Dataset, ExpressionMatrix, LabelVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobConfig {
    pub n_samples: usize,
    pub n_genes: usize,
    pub informative: usize,
    /// Difference of class means on informative genes, in noise sds.
    pub separation: f64,
    pub seed: u64,
}

impl Default for BlobConfig {
    fn default() -> Self {
        Self {
            n_samples: 60,
            n_genes: 500,
            informative: 20,
            separation: 3.0,
            seed: 1,
        }
    }
}

/// Two balanced classes of unit-variance Gaussian noise. Informative genes
/// (the first `informative` columns) sit at `∓separation/2` by class.
/// Samples alternate between classes.
pub fn two_blobs(cfg: &BlobConfig) -> Result<Dataset> {
    if cfg.n_samples < 4 || cfg.informative > cfg.n_genes || cfg.n_genes == 0 {
        return Err(Error::InvalidArgument(format!("invalid blob configuration {cfg:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let labels: Vec<usize> = (0..cfg.n_samples).map(|i| i % 2).collect();
    let half = cfg.separation / 2.0;
    // Row-major draw order keeps the stream independent of matrix layout.
    let mut values = DMatrix::zeros(cfg.n_samples, cfg.n_genes);
    for i in 0..cfg.n_samples {
        let shift = if labels[i] == 1 { half } else { -half };
        for j in 0..cfg.n_genes {
            let z: f64 = rng.sample(StandardNormal);
            values[(i, j)] = z + if j < cfg.informative { shift } else { 0.0 };
        }
    }
    let x = ExpressionMatrix::from_matrix(values)?;
    Dataset::with_class_names(x, LabelVector::new(labels, 2)?, vec!["a".into(), "b".into()])
}
