//! Stratified cross-validation of complete pipelines.
//!
//! A pipeline is preprocess → BSS/WSS selection → classifier. Under in-fold
//! selection every statistic is learned from training rows only; held-out
//! rows are touched solely by `predict`. Hyperparameters are tuned by an
//! inner stratified CV on each outer training fold.

mod cv;
mod folds;
mod pipeline;
mod report;

pub use cv::{
    cross_validate, cross_validate_observed, cross_validate_repeated, error_rate, fit_pipeline,
    fit_pipeline_observed, grid_search, grid_search_observed, FitObserver, FitScope, GridResult,
};
pub use folds::{stratified_kfold, stratified_kfold_relaxed, FoldAssignment};
pub use pipeline::{
    Classifier, FittedPipeline, FixedSettings, FrontEnd, Grid, HyperParams, KernelChoice, Method,
    PipelineSpec, SelectionMode, WIDE_LDA_RIDGE,
};
pub use report::{
    comparison_table, confusion_csv, folds_csv, format_rate, predictions_csv, summary_csv,
    EvalReport, FoldResult, CONFUSION_SCHEMA, FOLDS_SCHEMA, PREDICTIONS_SCHEMA, REPORT_SCHEMA,
};
