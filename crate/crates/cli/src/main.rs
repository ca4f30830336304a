//! `hdclass`: preprocessing, diagnostics, gene selection, cross-validated
//! comparison, training and prediction for n ≪ p expression data.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
//! Failures print one line: `error: kind=<data|numerical> code=<n>: <message>`.

mod commands;
mod config;
mod settings;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hdclass_core::error::Category;
use hdclass_core::glm::Family;
use hdclass_core::harness::{KernelChoice, SelectionMode};
use hdclass_core::preprocess::Standardization;

#[derive(Parser, Debug)]
#[command(name = "hdclass", version, about = "Classification of high-dimensional, low-sample expression data")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Clip, filter, log-transform and standardize a raw matrix.
    Preprocess(PreprocessCmd),
    /// Relative log expression statistics per sample.
    Rle(DiagnoseCmd),
    /// Box statistics of each sample's values.
    Boxstats(DiagnoseCmd),
    /// Principal component scores of the samples.
    Pca(PcaCmd),
    /// Rank genes by BSS/WSS and keep the best.
    Select(SelectCmd),
    /// Stratified k-fold cross-validation of one or more methods.
    Cv(CvCmd),
    /// Fit a pipeline on all samples and save the model.
    Train(TrainCmd),
    /// Predict classes of new samples with a saved model.
    Predict(PredictCmd),
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// key = value configuration file; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: $HDCLASS_OUT, else ./hdclass-out].
    #[arg(long, global = true)]
    pub out: Option<String>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct InputArgs {
    /// Expression matrix (samples as rows unless --genes-as-rows).
    #[arg(long)]
    pub data: Option<String>,
    /// The matrix file stores genes as rows.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub genes_as_rows: Option<bool>,
    /// Token marking a missing cell.
    #[arg(long)]
    pub na: Option<String>,
    /// Field separator: a character, `tab` or `comma` [default: tab for
    /// .tsv/.txt, comma otherwise].
    #[arg(long)]
    pub delimiter: Option<settings::Delimiter>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct PreprocessArgs {
    /// Lower clipping bound.
    #[arg(long)]
    pub floor: Option<f64>,
    /// Upper clipping bound.
    #[arg(long)]
    pub ceil: Option<f64>,
    /// A gene is kept only if max/min exceeds this.
    #[arg(long)]
    pub fold_min: Option<f64>,
    /// A gene is kept only if max - min exceeds this.
    #[arg(long)]
    pub span_min: Option<f64>,
    /// Base of the log transform.
    #[arg(long)]
    pub log_base: Option<f64>,
    /// Standardization after the log: off, sample or gene.
    #[arg(long)]
    pub standardize: Option<Standardization>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// Class labels, one per sample in matrix order.
    #[arg(long)]
    pub labels: Option<String>,
    /// Apply the preprocessing pipeline before selection.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub preprocess: Option<bool>,
    #[command(flatten)]
    pub pre: PreprocessArgs,
    /// Genes kept after BSS/WSS ranking: comma list of counts or `all`.
    #[arg(long)]
    pub p_keep: Option<String>,
    /// Where filters and ranking are learned: in-fold or global.
    #[arg(long)]
    pub selection: Option<SelectionMode>,
    /// PLS component counts to search.
    #[arg(long)]
    pub m: Option<String>,
    /// KNN neighbour counts to search.
    #[arg(long)]
    pub neighbors: Option<String>,
    /// KMA ridge values to search.
    #[arg(long)]
    pub lambda: Option<String>,
    /// KMA RBF width multipliers (of the median pairwise distance) to search.
    #[arg(long)]
    pub sigma_scale: Option<String>,
    /// KMA kernel: rbf, linear or poly:<degree>:<offset>.
    #[arg(long)]
    pub kernel: Option<KernelChoice>,
    /// KMA target smoothing.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Ridge added to LDA covariances.
    #[arg(long)]
    pub ridge: Option<f64>,
    /// PLSGLR response family: binomial or gaussian.
    #[arg(long)]
    pub family: Option<Family>,
    /// PLSGLR slope significance cutoff, or `off`.
    #[arg(long)]
    pub sparsify_p: Option<String>,
    /// Stop PLSGLR extraction once no slope is significant.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub stop_early: Option<bool>,
    /// Folds of the inner tuning CV.
    #[arg(long)]
    pub inner_folds: Option<usize>,
    /// Seed for fold assignment.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct PreprocessCmd {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub pre: PreprocessArgs,
}

#[derive(Args, Debug, Clone)]
pub struct DiagnoseCmd {
    #[command(flatten)]
    pub input: InputArgs,
    /// Run the preprocessing pipeline first.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub preprocess: Option<bool>,
    #[command(flatten)]
    pub pre: PreprocessArgs,
    /// Largest acceptable |median| of an RLE box.
    #[arg(long)]
    pub center_tolerance: Option<f64>,
    /// Largest acceptable RLE interquartile range.
    #[arg(long)]
    pub width_max: Option<f64>,
    /// Also write an SVG plot.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub svg: Option<bool>,
}

#[derive(Args, Debug, Clone)]
pub struct PcaCmd {
    #[command(flatten)]
    pub input: InputArgs,
    /// Optional labels used to colour the scatter plot.
    #[arg(long)]
    pub labels: Option<String>,
    /// Run the preprocessing pipeline first.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub preprocess: Option<bool>,
    #[command(flatten)]
    pub pre: PreprocessArgs,
    /// Number of components.
    #[arg(long)]
    pub components: Option<usize>,
    /// Also write an SVG plot.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub svg: Option<bool>,
}

#[derive(Args, Debug, Clone)]
pub struct SelectCmd {
    #[command(flatten)]
    pub input: InputArgs,
    /// Class labels, one per sample in matrix order.
    #[arg(long)]
    pub labels: Option<String>,
    /// Run the preprocessing pipeline first.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub preprocess: Option<bool>,
    #[command(flatten)]
    pub pre: PreprocessArgs,
    /// Number of top genes to keep.
    #[arg(long)]
    pub p_keep: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct CvCmd {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Method, comma list of methods, or `all`.
    #[arg(long)]
    pub method: Option<String>,
    /// Number of outer folds.
    #[arg(long)]
    pub k: Option<usize>,
    /// Repeat the CV with seeds seed, seed+1, … (extension; default 1).
    #[arg(long)]
    pub repeats: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct TrainCmd {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Method to fit.
    #[arg(long)]
    pub method: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct PredictCmd {
    #[command(flatten)]
    pub input: InputArgs,
    /// Model file written by `train`.
    #[arg(long)]
    pub model: Option<String>,
}

fn exit_code(err: &anyhow::Error) -> (Category, u8) {
    let core = err.chain().find_map(|e| e.downcast_ref::<hdclass_core::Error>());
    match core.map(hdclass_core::Error::category) {
        Some(Category::Numerical) => (Category::Numerical, 4),
        _ => (Category::Data, 3),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli.common, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (category, code) = exit_code(&e);
            let kind = match category {
                Category::Numerical => "numerical",
                Category::Data => "data",
            };
            let msg = format!("{e:#}").replace(['\n', '\r'], " ");
            eprintln!("error: kind={kind} code={code}: {msg}");
            ExitCode::from(code)
        }
    }
}
