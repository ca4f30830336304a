//! Shared fixtures for the benchmarks: synthetic two-class data in the
//! n ≪ p shape the classifiers are built for.

use hdclass_core::synthetic::{two_blobs, BlobConfig};
use hdclass_core::Dataset;

/// `n` samples by `p` genes, 20 of them informative.
pub fn fixture(n: usize, p: usize) -> Dataset {
    two_blobs(&BlobConfig {
        n_samples: n,
        n_genes: p,
        informative: 20.min(p),
        separation: 2.0,
        seed: 7,
    })
    .expect("valid blob configuration")
}

/// The response as 0/1 values.
pub fn binary_response(d: &Dataset) -> Vec<f64> {
    d.y.labels().iter().map(|&l| l as f64).collect()
}
