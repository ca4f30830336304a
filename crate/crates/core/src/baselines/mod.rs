//! Classical comparison classifiers: k-nearest neighbours, linear
//! discriminant analysis and PLS discriminant analysis.
//!
//! All of them require complete data and refuse masked input.

mod knn;
mod lda;
mod plsda;

pub use knn::{knn_classify, predict_many_k, KnnConfig, KnnModel};
pub use lda::{fit_lda, LdaModel};
pub use plsda::{dummy_code, fit_plsda, PlsDaModel};

pub(crate) use lda::argmax;
