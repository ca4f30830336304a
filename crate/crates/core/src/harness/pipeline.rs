use std::fmt;
use std::str::FromStr;

use crate::baselines::{fit_lda, fit_plsda, KnnConfig, KnnModel, LdaModel, PlsDaModel};
use crate::data::{Dataset, ExpressionMatrix};
use crate::error::{Error, Result};
use crate::kma::{self, fit_with_gram, gram, median_pairwise_distance, KernelSpec, KmaModel};
use crate::plsglr::{extract_components, response_for, ExtractOptions, PlsGlrDa, PlsGlrLog};
use crate::preprocess::{PreprocessConfig, Preprocessor};
use crate::select::{bss_wss_ranking, top_indices, GeneRanking};

/// Ridge applied to plain LDA when it has at least as many features as
/// residual degrees of freedom and no ridge was requested.
pub const WIDE_LDA_RIDGE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    PlsGlrLog,
    PlsGlrDa,
    Knn,
    Lda,
    PlsDa,
    Kma,
}

impl Method {
    /// Report column order.
    pub const ALL: [Method; 6] = [
        Method::PlsGlrLog,
        Method::PlsGlrDa,
        Method::Knn,
        Method::Lda,
        Method::PlsDa,
        Method::Kma,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::PlsGlrLog => "PLSGLR-log",
            Method::PlsGlrDa => "PLSGLRDA",
            Method::Knn => "KNN",
            Method::Lda => "LDA",
            Method::PlsDa => "PLSDA",
            Method::Kma => "KMA",
        }
    }

    pub fn uses_components(self) -> bool {
        matches!(self, Method::PlsGlrLog | Method::PlsGlrDa | Method::PlsDa)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.to_ascii_lowercase().chars().filter(|c| c.is_ascii_alphanumeric()).collect();
        Ok(match key.as_str() {
            "plsglrlog" => Method::PlsGlrLog,
            "plsglrda" => Method::PlsGlrDa,
            "knn" => Method::Knn,
            "lda" => Method::Lda,
            "plsda" => Method::PlsDa,
            "kma" => Method::Kma,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown method {s:?}; expected one of plsglr-log, plsglrda, knn, lda, plsda, kma"
                )))
            }
        })
    }
}

/// Kernel family for KMA; the RBF width is set per fit from the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelChoice {
    /// Width = `sigma_scale` × median pairwise training distance.
    Rbf,
    LinearPlusOne,
    Polynomial { degree: u32, offset: f64 },
}

impl fmt::Display for KernelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelChoice::Rbf => f.write_str("rbf"),
            KernelChoice::LinearPlusOne => f.write_str("linear"),
            KernelChoice::Polynomial { degree, offset } => write!(f, "poly:{degree}:{offset}"),
        }
    }
}

impl FromStr for KernelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["rbf"] => Ok(KernelChoice::Rbf),
            ["linear"] => Ok(KernelChoice::LinearPlusOne),
            ["poly", d, o] => {
                let degree = d.parse().map_err(|_| Error::InvalidArgument(format!("bad degree in {s:?}")))?;
                let offset = o.parse().map_err(|_| Error::InvalidArgument(format!("bad offset in {s:?}")))?;
                Ok(KernelChoice::Polynomial { degree, offset })
            }
            _ => Err(Error::InvalidArgument(format!(
                "unknown kernel {s:?}; expected rbf, linear or poly:<degree>:<offset>"
            ))),
        }
    }
}

/// Tunable settings; each method reads only the ones it uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    /// Component count for PLSGLR and PLS-DA.
    pub m: usize,
    /// Neighbour count for KNN.
    pub k: usize,
    pub lambda: f64,
    pub sigma_scale: f64,
    /// Genes kept by BSS/WSS ranking; `None` keeps all.
    pub p_keep: Option<usize>,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            m: 2,
            k: 3,
            lambda: 1.0,
            sigma_scale: 1.0,
            p_keep: None,
        }
    }
}

impl HyperParams {
    /// `key=value` pairs of the settings `method` depends on.
    pub fn describe(&self, method: Method) -> String {
        let mut parts = Vec::new();
        if let Some(p) = self.p_keep {
            parts.push(format!("p_keep={p}"));
        }
        match method {
            Method::PlsGlrLog | Method::PlsGlrDa | Method::PlsDa => parts.push(format!("m={}", self.m)),
            Method::Knn => parts.push(format!("k={}", self.k)),
            Method::Lda => {}
            Method::Kma => {
                parts.push(format!("lambda={}", self.lambda));
                parts.push(format!("sigma_scale={}", self.sigma_scale));
            }
        }
        parts.join(";")
    }
}

/// Settings fixed for a run (not tuned).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedSettings {
    pub extract: ExtractOptions,
    pub kernel: KernelChoice,
    pub epsilon: f64,
    /// Ridge for plain LDA and for the LDA heads.
    pub ridge: f64,
}

impl Default for FixedSettings {
    fn default() -> Self {
        Self {
            extract: ExtractOptions::default(),
            kernel: KernelChoice::Rbf,
            epsilon: kma::DEFAULT_EPSILON,
            ridge: 0.0,
        }
    }
}

/// Where preprocessing filters and the gene ranking are learned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    /// On each training fold only, then frozen for its held-out fold.
    InFold,
    /// Once on the whole dataset before splitting.
    Global,
}

impl fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMode::InFold => "in-fold",
            SelectionMode::Global => "global",
        })
    }
}

impl FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "in-fold" | "infold" | "fold" => Ok(SelectionMode::InFold),
            "global" => Ok(SelectionMode::Global),
            _ => Err(Error::InvalidArgument(format!("unknown selection mode {s:?}; expected in-fold or global"))),
        }
    }
}

/// Candidate values per tuned setting.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub m: Vec<usize>,
    pub k: Vec<usize>,
    pub lambda: Vec<f64>,
    pub sigma_scale: Vec<f64>,
    pub p_keep: Vec<Option<usize>>,
}

impl Grid {
    /// The default search space of `method`; untuned settings take `base`.
    pub fn for_method(method: Method, base: &HyperParams, p_keep: Vec<Option<usize>>) -> Self {
        let mut g = Self::single(base);
        if !p_keep.is_empty() {
            g.p_keep = p_keep;
        }
        match method {
            Method::PlsGlrLog | Method::PlsGlrDa | Method::PlsDa => g.m = vec![1, 2, 3],
            Method::Knn => g.k = vec![1, 3, 5, 7],
            Method::Lda => {}
            Method::Kma => {
                g.lambda = (-3..=3).map(|e| 10f64.powi(e)).collect();
                g.sigma_scale = vec![0.5, 1.0, 2.0];
            }
        }
        g
    }

    pub fn single(p: &HyperParams) -> Self {
        Self {
            m: vec![p.m],
            k: vec![p.k],
            lambda: vec![p.lambda],
            sigma_scale: vec![p.sigma_scale],
            p_keep: vec![p.p_keep],
        }
    }

    /// All combinations, simplest first: smaller `p_keep`, `m`, `k`, then
    /// larger `λ` and `σ`.
    pub fn points(&self) -> Result<Vec<HyperParams>> {
        if self.m.is_empty()
            || self.k.is_empty()
            || self.lambda.is_empty()
            || self.sigma_scale.is_empty()
            || self.p_keep.is_empty()
        {
            return Err(Error::InvalidArgument("every grid axis needs at least one value".into()));
        }
        let mut p_keep = self.p_keep.clone();
        // None (all genes) is the least simple choice.
        p_keep.sort_by_key(|p| p.unwrap_or(usize::MAX));
        p_keep.dedup();
        let asc = |v: &[usize]| {
            let mut v = v.to_vec();
            v.sort_unstable();
            v.dedup();
            v
        };
        let desc = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(|a, b| b.total_cmp(a));
            v.dedup();
            v
        };
        let (ms, ks, ls, ss) = (asc(&self.m), asc(&self.k), desc(&self.lambda), desc(&self.sigma_scale));
        let mut out = Vec::new();
        for &p in &p_keep {
            for &m in &ms {
                for &k in &ks {
                    for &lambda in &ls {
                        for &sigma_scale in &ss {
                            out.push(HyperParams {
                                m,
                                k,
                                lambda,
                                sigma_scale,
                                p_keep: p,
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// The full specification of one evaluated pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSpec {
    pub method: Method,
    pub preprocess: Option<PreprocessConfig>,
    pub selection: SelectionMode,
    pub params: HyperParams,
    /// Tuned by nested CV when present; otherwise `params` is used as is.
    pub grid: Option<Grid>,
    pub inner_folds: usize,
    pub settings: FixedSettings,
}

impl PipelineSpec {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            preprocess: None,
            selection: SelectionMode::InFold,
            params: HyperParams::default(),
            grid: None,
            inner_folds: 5,
            settings: FixedSettings::default(),
        }
    }
}

/// Preprocessing and gene selection learned from training data.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontEnd {
    pub preprocessor: Option<Preprocessor>,
    /// Columns of the preprocessed matrix that are kept.
    pub selected: Option<Vec<usize>>,
    pub input_genes: usize,
}

impl FrontEnd {
    pub fn apply(&self, x: &ExpressionMatrix) -> Result<ExpressionMatrix> {
        if x.ncols() != self.input_genes {
            return Err(Error::Shape(format!(
                "pipeline fitted on {} genes, input has {}",
                self.input_genes,
                x.ncols()
            )));
        }
        let x = match &self.preprocessor {
            Some(p) => p.apply(x)?,
            None => x.clone(),
        };
        Ok(match &self.selected {
            Some(cols) => x.select_columns(cols),
            None => x,
        })
    }
}

/// Preprocessed training data with its ranking, from which fronts for any
/// `p_keep` are cut.
pub(crate) struct RankedBase {
    preprocessor: Option<Preprocessor>,
    processed: Dataset,
    ranking: Option<GeneRanking>,
    input_genes: usize,
}

impl RankedBase {
    pub(crate) fn fit(train: &Dataset, preprocess: Option<&PreprocessConfig>, need_ranking: bool) -> Result<Self> {
        let preprocessor = preprocess.map(|cfg| Preprocessor::fit(&train.x, cfg)).transpose()?;
        let processed = match &preprocessor {
            Some(p) => train.with_x(p.apply(&train.x)?)?,
            None => train.clone(),
        };
        let ranking = need_ranking.then(|| bss_wss_ranking(&processed));
        Ok(Self {
            preprocessor,
            processed,
            ranking,
            input_genes: train.n_genes(),
        })
    }

    /// The same learned state with `train` as the training rows.
    pub(crate) fn restrict(&self, train: &Dataset) -> Result<Self> {
        let processed = match &self.preprocessor {
            Some(p) => train.with_x(p.apply(&train.x)?)?,
            None => train.clone(),
        };
        Ok(Self {
            preprocessor: self.preprocessor.clone(),
            processed,
            ranking: self.ranking.clone(),
            input_genes: self.input_genes,
        })
    }

    /// Front end keeping the top `p_keep` genes; a `p_keep` at or above the
    /// available gene count keeps everything.
    pub(crate) fn front(&self, p_keep: Option<usize>) -> Result<FrontEnd> {
        let genes = self.processed.n_genes();
        let selected = match (p_keep, &self.ranking) {
            (Some(p), Some(r)) if p < genes => Some(top_indices(r, p)?),
            (Some(p), None) if p < genes => {
                return Err(Error::InvalidArgument("gene selection requested without a ranking".into()))
            }
            _ => None,
        };
        Ok(FrontEnd {
            preprocessor: self.preprocessor.clone(),
            selected,
            input_genes: self.input_genes,
        })
    }

    /// Training data as the classifier sees it under `front`.
    pub(crate) fn training_view(&self, front: &FrontEnd) -> Dataset {
        match &front.selected {
            Some(cols) => self.processed.select_columns(cols),
            None => self.processed.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    PlsGlrLog(PlsGlrLog),
    PlsGlrDa(PlsGlrDa),
    Knn(KnnModel),
    Lda(LdaModel),
    PlsDa(PlsDaModel),
    Kma(KmaModel),
}

impl Classifier {
    pub fn method(&self) -> Method {
        match self {
            Classifier::PlsGlrLog(_) => Method::PlsGlrLog,
            Classifier::PlsGlrDa(_) => Method::PlsGlrDa,
            Classifier::Knn(_) => Method::Knn,
            Classifier::Lda(_) => Method::Lda,
            Classifier::PlsDa(_) => Method::PlsDa,
            Classifier::Kma(_) => Method::Kma,
        }
    }

    pub fn predict(&self, x: &ExpressionMatrix) -> Result<Vec<usize>> {
        match self {
            Classifier::PlsGlrLog(c) => c.predict(x),
            Classifier::PlsGlrDa(c) => c.predict(x),
            Classifier::Knn(c) => c.predict(x.require_complete("KNN")?),
            Classifier::Lda(c) => Ok(c.predict(x.require_complete("LDA")?)?.0),
            Classifier::PlsDa(c) => c.predict(x.require_complete("PLS-DA")?),
            Classifier::Kma(c) => Ok(c.predict(x.require_complete("KMA")?)?.0),
        }
    }
}

fn lda_ridge(requested: f64, q: usize, d: &Dataset) -> f64 {
    if requested == 0.0 && q + d.class_count() >= d.n_samples() {
        log::info!(
            "LDA on {q} features with {} samples is singular; using ridge {WIDE_LDA_RIDGE}",
            d.n_samples()
        );
        WIDE_LDA_RIDGE
    } else {
        requested
    }
}

/// Fits `method` once per entry of `points` on already preprocessed data,
/// sharing work between points: components are extracted once at the
/// largest `m` and truncated, and each kernel matrix is built once per width.
pub(crate) fn fit_classifiers(
    d: &Dataset,
    method: Method,
    settings: &FixedSettings,
    points: &[HyperParams],
) -> Vec<Result<Classifier>> {
    // The first point keeps the original error so its category survives.
    let failed = |e: Error| -> Vec<Result<Classifier>> {
        let msg = e.to_string();
        std::iter::once(Err(e))
            .chain((1..points.len()).map(|_| Err(Error::Numerical(msg.clone()))))
            .collect()
    };
    match method {
        Method::PlsGlrLog | Method::PlsGlrDa => {
            let max_m = points.iter().map(|p| p.m).max().unwrap_or(1);
            let y = match response_for(d, settings.extract.family) {
                Ok(y) => y,
                Err(e) => return failed(e),
            };
            let model = match extract_components(&d.x, &y, max_m, &settings.extract) {
                Ok(m) => m,
                Err(e) => return failed(e),
            };
            points
                .iter()
                .map(|p| {
                    let sub = model.truncate(p.m.min(model.n_components()))?;
                    Ok(match method {
                        Method::PlsGlrLog => {
                            Classifier::PlsGlrLog(PlsGlrLog::from_model(sub, &y, &settings.extract.glm)?)
                        }
                        _ => Classifier::PlsGlrDa(PlsGlrDa::from_model(sub, d, settings.ridge)?),
                    })
                })
                .collect()
        }
        Method::Knn => {
            let x = match d.x.require_complete("KNN") {
                Ok(x) => x,
                Err(e) => return failed(e),
            };
            points
                .iter()
                .map(|p| Ok(Classifier::Knn(KnnModel::fit(x.clone(), d.y.clone(), KnnConfig { k: p.k })?)))
                .collect()
        }
        Method::Lda => points
            .iter()
            .map(|_| {
                let x = d.x.require_complete("LDA")?;
                Ok(Classifier::Lda(fit_lda(x, &d.y, lda_ridge(settings.ridge, x.ncols(), d))?))
            })
            .collect(),
        Method::PlsDa => {
            let max_m = points.iter().map(|p| p.m).max().unwrap_or(1);
            let full = d
                .x
                .require_complete("PLS-DA")
                .and_then(|x| fit_plsda(x, &d.y, max_m, settings.ridge));
            match full {
                Ok(model) => points
                    .iter()
                    .map(|p| Ok(Classifier::PlsDa(model.truncate(p.m, &d.y, settings.ridge)?)))
                    .collect(),
                Err(e) => failed(e),
            }
        }
        Method::Kma => {
            let x = match d.x.require_complete("KMA") {
                Ok(x) => x,
                Err(e) => return failed(e),
            };
            let median = match settings.kernel {
                KernelChoice::Rbf => match median_pairwise_distance(x) {
                    Ok(m) => m,
                    Err(e) => return failed(e),
                },
                _ => 1.0,
            };
            let kernel_for = |p: &HyperParams| match settings.kernel {
                KernelChoice::Rbf => KernelSpec::Rbf {
                    sigma: p.sigma_scale * median,
                },
                KernelChoice::LinearPlusOne => KernelSpec::LinearPlusOne,
                KernelChoice::Polynomial { degree, offset } => KernelSpec::Polynomial { degree, offset },
            };
            let mut cache: Vec<(KernelSpec, Result<nalgebra::DMatrix<f64>>)> = Vec::new();
            points
                .iter()
                .map(|p| {
                    let kernel = kernel_for(p);
                    let idx = match cache.iter().position(|(k, _)| *k == kernel) {
                        Some(i) => i,
                        None => {
                            cache.push((kernel, gram(x, x, &kernel)));
                            cache.len() - 1
                        }
                    };
                    let k = cache[idx].1.as_ref().map_err(|e| Error::Numerical(e.to_string()))?;
                    Ok(Classifier::Kma(fit_with_gram(x, &d.y, k, kernel, p.lambda, settings.epsilon)?))
                })
                .collect()
        }
    }
}

/// A fitted pipeline: front end, classifier and the settings that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPipeline {
    pub front: FrontEnd,
    pub classifier: Classifier,
    pub params: HyperParams,
    pub class_names: Vec<String>,
}

impl FittedPipeline {
    pub fn method(&self) -> Method {
        self.classifier.method()
    }

    /// Predicted class indices for raw (unpreprocessed) samples.
    pub fn predict(&self, x: &ExpressionMatrix) -> Result<Vec<usize>> {
        self.classifier.predict(&self.front.apply(x)?)
    }

    /// Genes of the raw input that reach the classifier, in column order.
    pub fn used_genes(&self) -> Vec<usize> {
        let kept: Vec<usize> = match &self.front.preprocessor {
            Some(p) => p.kept.clone(),
            None => (0..self.front.input_genes).collect(),
        };
        match &self.front.selected {
            Some(sel) => sel.iter().map(|&j| kept[j]).collect(),
            None => kept,
        }
    }
}
