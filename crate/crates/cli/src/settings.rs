//! Turning flags and config entries into core configuration, recording
//! every resolved value.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use hdclass_core::glm::Family;
use hdclass_core::harness::{FixedSettings, Grid, HyperParams, KernelChoice, Method, PipelineSpec, SelectionMode};
use hdclass_core::io::{delimiter_for_path, load_dataset, load_matrix, LoadOptions};
use hdclass_core::plsglr::ExtractOptions;
use hdclass_core::preprocess::{preprocess, PreprocessConfig, Standardization};
use hdclass_core::{Dataset, ExpressionMatrix};
use sha2::{Digest, Sha256};

use crate::config::{join, ConfigFile, Record, Resolver};
use crate::{CommonArgs, InputArgs, ModelArgs, PreprocessArgs};

pub const OUT_ENV: &str = "HDCLASS_OUT";
const DEFAULT_OUT: &str = "hdclass-out";

/// Field separator with a printable spelling for tab and comma.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delimiter(pub char);

impl fmt::Display for Delimiter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            '\t' => f.write_str("tab"),
            ',' => f.write_str("comma"),
            c => write!(f, "{c}"),
        }
    }
}

impl FromStr for Delimiter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tab" | "\\t" | "\t" => Ok(Self('\t')),
            "comma" | "," => Ok(Self(',')),
            _ => {
                let mut chars = s.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => Ok(Self(c)),
                    _ => Err(format!("delimiter must be one character, `tab` or `comma`, got {s:?}")),
                }
            }
        }
    }
}

/// A gene count, or `all` for no selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PKeep(pub Option<usize>);

impl fmt::Display for PKeep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(p) => write!(f, "{p}"),
            None => f.write_str("all"),
        }
    }
}

impl FromStr for PKeep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            return Ok(Self(None));
        }
        match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("expected a positive gene count or `all`, got {s:?}")),
            Ok(p) => Ok(Self(Some(p))),
        }
    }
}

/// A p-value cutoff, or `off`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff(pub Option<f64>);

impl fmt::Display for Cutoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(p) => write!(f, "{p}"),
            None => f.write_str("off"),
        }
    }
}

impl FromStr for Cutoff {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "off" {
            return Ok(Self(None));
        }
        match s.parse::<f64>() {
            Ok(p) if p > 0.0 && p <= 1.0 => Ok(Self(Some(p))),
            _ => Err(format!("expected a p-value in (0, 1] or `off`, got {s:?}")),
        }
    }
}

pub fn load_config(common: &CommonArgs) -> Result<ConfigFile> {
    match &common.config {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::default()),
    }
}

/// Resolves and creates the output directory.
pub fn output_dir(r: &mut Resolver, common: &CommonArgs) -> Result<PathBuf> {
    let fallback = std::env::var(OUT_ENV).unwrap_or_else(|_| DEFAULT_OUT.to_string());
    let dir: String = r.value("output.dir", common.out.clone(), fallback)?;
    let dir = PathBuf::from(dir);
    fs::create_dir_all(&dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    Ok(dir)
}

pub fn checksum(r: &mut Resolver, key: &str, path: &Path) -> Result<()> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    r.note(&format!("checksum.{key}"), format!("sha256:{}", hex::encode(Sha256::digest(&bytes))));
    Ok(())
}

/// The matrix path and its parsing options.
pub fn input(r: &mut Resolver, a: &InputArgs) -> Result<(PathBuf, LoadOptions)> {
    let data: String = r.required("input.data", a.data.clone(), "expression matrix (--data)")?;
    let path = PathBuf::from(data);
    let genes_as_rows = r.value("input.genes_as_rows", a.genes_as_rows, false)?;
    let na_token = r.value("input.na", a.na.clone(), "NA".to_string())?;
    let delimiter = r.value("input.delimiter", a.delimiter, Delimiter(delimiter_for_path(&path)))?;
    checksum(r, "data", &path)?;
    let options = LoadOptions {
        delimiter: Some(delimiter.0),
        na_token,
        genes_as_rows,
    };
    Ok((path, options))
}

pub fn load_unlabelled(r: &mut Resolver, a: &InputArgs) -> Result<ExpressionMatrix> {
    let (path, options) = input(r, a)?;
    Ok(load_matrix(&path, &options)?)
}

pub fn load_labelled(r: &mut Resolver, a: &InputArgs, labels: Option<String>) -> Result<Dataset> {
    let (path, options) = input(r, a)?;
    let labels: String = r.required("input.labels", labels, "class labels (--labels)")?;
    let labels = PathBuf::from(labels);
    checksum(r, "labels", &labels)?;
    Ok(load_dataset(&path, &labels, &options)?)
}

/// Preprocessing parameters; always resolved so the record is complete.
pub fn preprocess_config(r: &mut Resolver, a: &PreprocessArgs) -> Result<PreprocessConfig> {
    let d = PreprocessConfig::default();
    let cfg = PreprocessConfig {
        floor: r.value("preprocess.floor", a.floor, d.floor)?,
        ceil: r.value("preprocess.ceil", a.ceil, d.ceil)?,
        fold_min: r.value("preprocess.fold_min", a.fold_min, d.fold_min)?,
        span_min: r.value("preprocess.span_min", a.span_min, d.span_min)?,
        log_base: r.value("preprocess.log_base", a.log_base, d.log_base)?,
        standardize: r.value::<Standardization>("preprocess.standardize", a.standardize, d.standardize)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// The optional preprocessing stage of diagnostic commands.
pub fn maybe_preprocess(
    r: &mut Resolver,
    enabled: Option<bool>,
    a: &PreprocessArgs,
    x: ExpressionMatrix,
) -> Result<(ExpressionMatrix, Vec<usize>)> {
    let enabled = r.value("preprocess.enabled", enabled, false)?;
    let cfg = preprocess_config(r, a)?;
    if enabled {
        Ok(preprocess(&x, &cfg)?)
    } else {
        let all = (0..x.ncols()).collect();
        Ok((x, all))
    }
}

pub fn methods(r: &mut Resolver, flag: Option<String>, allow_many: bool) -> Result<Vec<Method>> {
    let raw = match flag {
        Some(s) => s,
        None => r
            .file_raw("classifier.method")
            .map(str::to_string)
            .ok_or_else(|| anyhow!("missing method: pass --method or set classifier.method in the config file"))?,
    };
    let methods: Vec<Method> = if raw.trim() == "all" {
        Method::ALL.to_vec()
    } else {
        crate::config::parse_list(&raw)?
    };
    if methods.iter().enumerate().any(|(i, m)| methods[..i].contains(m)) {
        bail!("methods listed twice in {raw:?}");
    }
    if !allow_many && methods.len() != 1 {
        bail!("exactly one method is needed here, got {raw:?}");
    }
    r.note("classifier.method", join(&methods.iter().map(|m| key_of(*m)).collect::<Vec<_>>()));
    Ok(methods)
}

/// Lower-case spelling accepted back by the parser.
fn key_of(m: Method) -> &'static str {
    match m {
        Method::PlsGlrLog => "plsglr-log",
        Method::PlsGlrDa => "plsglrda",
        Method::Knn => "knn",
        Method::Lda => "lda",
        Method::PlsDa => "plsda",
        Method::Kma => "kma",
    }
}

fn list_or<T>(r: &mut Resolver, key: &str, flag: Option<&str>, default: Vec<T>) -> Result<Vec<T>>
where
    T: FromStr + fmt::Display,
    T::Err: fmt::Display,
{
    let v = r.list(key, flag)?.unwrap_or(default);
    r.note(key, join(&v));
    Ok(v)
}

/// Everything needed to build a pipeline for any method.
pub struct ModelSetup {
    pub preprocess: Option<PreprocessConfig>,
    pub selection: SelectionMode,
    pub p_keep: Vec<PKeep>,
    pub m: Vec<usize>,
    pub k: Vec<usize>,
    pub lambda: Vec<f64>,
    pub sigma_scale: Vec<f64>,
    pub inner_folds: usize,
    pub seed: u64,
    pub settings: FixedSettings,
}

pub fn model_setup(r: &mut Resolver, a: &ModelArgs) -> Result<ModelSetup> {
    let enabled = r.value("preprocess.enabled", a.preprocess, false)?;
    let cfg = preprocess_config(r, &a.pre)?;
    let default_keep = if enabled {
        [50, 100, 200, 500].map(|p| PKeep(Some(p))).to_vec()
    } else {
        vec![PKeep(None)]
    };
    let p_keep = list_or(r, "select.p_keep", a.p_keep.as_deref(), default_keep)?;
    let selection = r.value("select.mode", a.selection, SelectionMode::InFold)?;
    let m = list_or(r, "classifier.m", a.m.as_deref(), vec![1, 2, 3])?;
    let k = list_or(r, "classifier.k", a.neighbors.as_deref(), vec![1, 3, 5, 7])?;
    let lambda = list_or(
        r,
        "classifier.lambda",
        a.lambda.as_deref(),
        (-3..=3).map(|e| 10f64.powi(e)).collect(),
    )?;
    let sigma_scale = list_or(r, "classifier.sigma_scale", a.sigma_scale.as_deref(), vec![0.5, 1.0, 2.0])?;
    if m.contains(&0) || k.contains(&0) {
        bail!("component and neighbour counts must be positive");
    }
    if lambda.iter().chain(&sigma_scale).any(|v| !(v.is_finite() && *v > 0.0)) {
        bail!("lambda and sigma_scale values must be positive");
    }
    let base = FixedSettings::default();
    let family = r.value::<Family>("classifier.family", a.family, base.extract.family)?;
    let sparsify: Cutoff = r.value(
        "classifier.sparsify_p",
        a.sparsify_p.as_deref().map(str::parse).transpose().map_err(|e: String| anyhow!(e))?,
        Cutoff(base.extract.sparsify_p_threshold),
    )?;
    let stop_early = r.value("classifier.stop_early", a.stop_early, base.extract.stop_when_insignificant)?;
    let settings = FixedSettings {
        extract: ExtractOptions {
            family,
            sparsify_p_threshold: sparsify.0,
            stop_when_insignificant: stop_early,
            ..base.extract
        },
        kernel: r.value::<KernelChoice>("classifier.kernel", a.kernel, base.kernel)?,
        epsilon: r.value("classifier.epsilon", a.epsilon, base.epsilon)?,
        ridge: r.value("classifier.ridge", a.ridge, base.ridge)?,
    };
    Ok(ModelSetup {
        preprocess: enabled.then_some(cfg),
        selection,
        p_keep,
        m,
        k,
        lambda,
        sigma_scale,
        inner_folds: r.value("cv.inner_folds", a.inner_folds, 5)?,
        seed: r.value("seed", a.seed, 1)?,
        settings,
    })
}

impl ModelSetup {
    /// The pipeline of `method`, tuning only the settings it reads.
    pub fn spec(&self, method: Method) -> PipelineSpec {
        let params = HyperParams {
            m: self.m[0],
            k: self.k[0],
            lambda: self.lambda[0],
            sigma_scale: self.sigma_scale[0],
            p_keep: self.p_keep[0].0,
        };
        let mut grid = Grid::single(&params);
        grid.p_keep = self.p_keep.iter().map(|p| p.0).collect();
        match method {
            Method::PlsGlrLog | Method::PlsGlrDa | Method::PlsDa => grid.m = self.m.clone(),
            Method::Knn => grid.k = self.k.clone(),
            Method::Lda => {}
            Method::Kma => {
                grid.lambda = self.lambda.clone();
                if self.settings.kernel == KernelChoice::Rbf {
                    grid.sigma_scale = self.sigma_scale.clone();
                }
            }
        }
        let tuned = [grid.m.len(), grid.k.len(), grid.lambda.len(), grid.sigma_scale.len(), grid.p_keep.len()]
            .iter()
            .any(|&n| n > 1);
        PipelineSpec {
            method,
            preprocess: self.preprocess,
            selection: self.selection,
            params,
            grid: tuned.then_some(grid),
            inner_folds: self.inner_folds,
            settings: self.settings,
        }
    }
}

/// Writes an artifact into the output directory.
pub fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_provenance(dir: &Path, record: &Record) -> Result<()> {
    write(dir, "provenance.txt", &record.render())
}
