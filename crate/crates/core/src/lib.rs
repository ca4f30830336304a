//! Classification of high-dimensional, low-sample data.
//!
//! The crate provides PLS generalized linear regression component
//! extraction with logistic ([`plsglr::PlsGlrLog`]) and discriminant
//! ([`plsglr::PlsGlrDa`]) heads, the kernel multilogit classifier
//! ([`kma`]), classical baselines ([`baselines`]), microarray
//! preprocessing and diagnostics ([`preprocess`]), BSS/WSS gene ranking
//! ([`select`]) and a stratified cross-validation harness ([`harness`]).
//!
//! Matrices are samples × genes throughout; missing cells are tracked by
//! [`ExpressionMatrix`]'s mask.

pub mod baselines;
pub mod data;
pub mod error;
pub mod glm;
pub mod harness;
pub mod io;
pub mod kma;
pub mod model_io;
pub mod plsglr;
pub mod preprocess;
pub mod select;
pub mod stats;
pub mod synthetic;

pub use data::{center_columns, Dataset, ExpressionMatrix, LabelVector};
pub use error::{Error, Result};

#[cfg(test)]
mod proptests;
