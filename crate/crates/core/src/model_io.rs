//! Versioned plain-text model files.
//!
//! ```text
//! hdclass-model v1
//! <key> <value>
//! matrix <name> <rows> <cols>
//! <one line of space-separated values per row>
//! indices <name> <count>
//! <one line of space-separated indices>
//! end
//! ```
//!
//! Keys are dotted paths (`lda.ridge`), values run to the end of the line,
//! and numbers use the shortest representation that parses back exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::baselines::{KnnModel, LdaModel, PlsDaModel};
use crate::data::LabelVector;
use crate::error::{Error, Result};
use crate::harness::{Classifier, FittedPipeline, FrontEnd, HyperParams, Method};
use crate::kma::{KernelSpec, KmaModel};
use crate::plsglr::{PlsGlrDa, PlsGlrLog, PlsGlrModel};
use crate::preprocess::{PreprocessConfig, Preprocessor};

pub const MAGIC: &str = "hdclass-model v1";

#[derive(Default)]
struct Writer {
    out: String,
}

impl Writer {
    fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.out, "{key} {value}");
    }

    fn matrix(&mut self, name: &str, m: &DMatrix<f64>) {
        let _ = writeln!(self.out, "matrix {name} {} {}", m.nrows(), m.ncols());
        for r in m.row_iter() {
            let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(self.out, "{}", line.join(" "));
        }
    }

    fn vector(&mut self, name: &str, v: &[f64]) {
        self.matrix(name, &DMatrix::from_row_slice(1, v.len(), v));
    }

    fn indices(&mut self, name: &str, idx: &[usize]) {
        let _ = writeln!(self.out, "indices {name} {}", idx.len());
        let line: Vec<String> = idx.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(self.out, "{}", line.join(" "));
    }
}

enum Entry {
    Value(String),
    Matrix(DMatrix<f64>),
    Indices(Vec<usize>),
}

struct Reader {
    entries: BTreeMap<String, (usize, Entry)>,
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::ModelFormat { line, msg: msg.into() }
}

impl Reader {
    fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l.trim_end() == MAGIC => {}
            Some((_, l)) => return Err(bad(1, format!("expected {MAGIC:?}, found {l:?}"))),
            None => return Err(bad(1, "empty model file")),
        }
        let mut entries = BTreeMap::new();
        let mut ended = false;
        while let Some((no, line)) = lines.next() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if line == "end" {
                ended = true;
                break;
            }
            let (head, rest) = line.split_once(' ').unwrap_or((line, ""));
            let (name, entry) = match head {
                "matrix" => {
                    let parts: Vec<&str> = rest.split(' ').collect();
                    let [name, r, c] = parts.as_slice() else {
                        return Err(bad(no, "matrix header needs name, rows and cols"));
                    };
                    let rows: usize = r.parse().map_err(|_| bad(no, "bad row count"))?;
                    let cols: usize = c.parse().map_err(|_| bad(no, "bad column count"))?;
                    let mut m = DMatrix::zeros(rows, cols);
                    for i in 0..rows {
                        let (rno, row) = lines.next().ok_or_else(|| bad(no, format!("matrix {name} truncated")))?;
                        let vals: Vec<f64> = row
                            .split_whitespace()
                            .map(|v| v.parse::<f64>())
                            .collect::<std::result::Result<_, _>>()
                            .map_err(|_| bad(rno, "unparseable number"))?;
                        if vals.len() != cols {
                            return Err(bad(rno, format!("expected {cols} values, found {}", vals.len())));
                        }
                        for (j, v) in vals.into_iter().enumerate() {
                            m[(i, j)] = v;
                        }
                    }
                    (name.to_string(), Entry::Matrix(m))
                }
                "indices" => {
                    let (name, n) = rest.split_once(' ').ok_or_else(|| bad(no, "indices header needs name and count"))?;
                    let n: usize = n.parse().map_err(|_| bad(no, "bad index count"))?;
                    let (rno, row) = lines.next().ok_or_else(|| bad(no, format!("indices {name} truncated")))?;
                    let idx: Vec<usize> = row
                        .split_whitespace()
                        .map(|v| v.parse())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad(rno, "unparseable index"))?;
                    if idx.len() != n {
                        return Err(bad(rno, format!("expected {n} indices, found {}", idx.len())));
                    }
                    (name.to_string(), Entry::Indices(idx))
                }
                key => (key.to_string(), Entry::Value(rest.to_string())),
            };
            if entries.insert(name.clone(), (no, entry)).is_some() {
                return Err(bad(no, format!("duplicate entry {name}")));
            }
        }
        if !ended {
            return Err(bad(text.lines().count(), "missing end marker"));
        }
        Ok(Self { entries })
    }

    fn get(&self, key: &str) -> Result<&(usize, Entry)> {
        self.entries.get(key).ok_or_else(|| bad(0, format!("missing entry {key}")))
    }

    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn value(&self, key: &str) -> Result<(usize, &str)> {
        match self.get(key)? {
            (no, Entry::Value(v)) => Ok((*no, v.as_str())),
            (no, _) => Err(bad(*no, format!("{key} should be a value"))),
        }
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let (no, v) = self.value(key)?;
        v.parse().map_err(|_| bad(no, format!("bad value {v:?} for {key}")))
    }

    fn optional<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        let (no, v) = self.value(key)?;
        if v == "none" {
            return Ok(None);
        }
        v.parse().map(Some).map_err(|_| bad(no, format!("bad value {v:?} for {key}")))
    }

    fn matrix(&self, key: &str) -> Result<DMatrix<f64>> {
        match self.get(key)? {
            (_, Entry::Matrix(m)) => Ok(m.clone()),
            (no, _) => Err(bad(*no, format!("{key} should be a matrix"))),
        }
    }

    fn vector(&self, key: &str) -> Result<Vec<f64>> {
        let m = self.matrix(key)?;
        if m.nrows() != 1 {
            return Err(bad(self.get(key)?.0, format!("{key} should have one row")));
        }
        Ok(m.iter().copied().collect())
    }

    fn indices(&self, key: &str) -> Result<Vec<usize>> {
        match self.get(key)? {
            (_, Entry::Indices(v)) => Ok(v.clone()),
            (no, _) => Err(bad(*no, format!("{key} should be an index list"))),
        }
    }
}

fn optional(v: Option<impl std::fmt::Display>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

fn write_lda(w: &mut Writer, prefix: &str, m: &LdaModel) {
    w.matrix(&format!("{prefix}.means"), &m.means);
    w.matrix(&format!("{prefix}.coefficients"), &m.coefficients);
    w.vector(&format!("{prefix}.intercepts"), &m.intercepts);
    w.vector(&format!("{prefix}.log_priors"), &m.log_priors);
    w.kv(&format!("{prefix}.ridge"), m.ridge);
}

fn read_lda(r: &Reader, prefix: &str) -> Result<LdaModel> {
    Ok(LdaModel {
        means: r.matrix(&format!("{prefix}.means"))?,
        coefficients: r.matrix(&format!("{prefix}.coefficients"))?,
        intercepts: r.vector(&format!("{prefix}.intercepts"))?,
        log_priors: r.vector(&format!("{prefix}.log_priors"))?,
        ridge: r.parsed(&format!("{prefix}.ridge"))?,
    })
}

fn write_plsglr(w: &mut Writer, m: &PlsGlrModel) {
    w.kv("plsglr.family", m.family);
    w.kv("plsglr.sparsify_p_threshold", optional(m.sparsify_p_threshold));
    w.vector("plsglr.column_means", &m.column_means);
    w.matrix("plsglr.weights", &m.weights);
    w.matrix("plsglr.x_weights", &m.x_weights);
    w.matrix("plsglr.loadings", &m.loadings);
    w.matrix("plsglr.components", &m.components);
    w.indices("plsglr.undetermined_rows", &m.undetermined_rows);
}

fn read_plsglr(r: &Reader) -> Result<PlsGlrModel> {
    Ok(PlsGlrModel {
        family: r.parsed("plsglr.family")?,
        sparsify_p_threshold: r.optional("plsglr.sparsify_p_threshold")?,
        column_means: r.vector("plsglr.column_means")?,
        weights: r.matrix("plsglr.weights")?,
        x_weights: r.matrix("plsglr.x_weights")?,
        loadings: r.matrix("plsglr.loadings")?,
        components: r.matrix("plsglr.components")?,
        undetermined_rows: r.indices("plsglr.undetermined_rows")?,
    })
}

fn write_kernel(w: &mut Writer, k: &KernelSpec) {
    match k {
        KernelSpec::LinearPlusOne => w.kv("kma.kernel", "linear"),
        KernelSpec::Rbf { sigma } => w.kv("kma.kernel", format!("rbf {sigma}")),
        KernelSpec::Polynomial { degree, offset } => w.kv("kma.kernel", format!("poly {degree} {offset}")),
    }
}

fn read_kernel(r: &Reader) -> Result<KernelSpec> {
    let (no, v) = r.value("kma.kernel")?;
    let parts: Vec<&str> = v.split(' ').collect();
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad(no, format!("bad kernel parameter {s:?}")));
    let k = match parts.as_slice() {
        ["linear"] => KernelSpec::LinearPlusOne,
        ["rbf", s] => KernelSpec::Rbf { sigma: num(s)? },
        ["poly", d, o] => KernelSpec::Polynomial {
            degree: d.parse().map_err(|_| bad(no, "bad polynomial degree"))?,
            offset: num(o)?,
        },
        _ => return Err(bad(no, format!("unknown kernel {v:?}"))),
    };
    k.validate()?;
    Ok(k)
}

/// Model file text for a fitted pipeline.
pub fn format_model(p: &FittedPipeline) -> String {
    let mut w = Writer::default();
    w.out.push_str(MAGIC);
    w.out.push('\n');
    w.kv("method", p.method());
    w.kv("classes", p.class_names.len());
    for (i, name) in p.class_names.iter().enumerate() {
        w.kv(&format!("class.{i}"), name);
    }
    w.kv("params.m", p.params.m);
    w.kv("params.k", p.params.k);
    w.kv("params.lambda", p.params.lambda);
    w.kv("params.sigma_scale", p.params.sigma_scale);
    w.kv("params.p_keep", optional(p.params.p_keep));

    w.kv("front.input_genes", p.front.input_genes);
    match &p.front.preprocessor {
        Some(pre) => {
            let c = &pre.config;
            w.kv("preprocess", "yes");
            w.kv("preprocess.floor", c.floor);
            w.kv("preprocess.ceil", c.ceil);
            w.kv("preprocess.fold_min", c.fold_min);
            w.kv("preprocess.span_min", c.span_min);
            w.kv("preprocess.log_base", c.log_base);
            w.kv("preprocess.standardize", c.standardize);
            w.kv("preprocess.input_genes", pre.input_genes);
            w.indices("preprocess.kept", &pre.kept);
            if let Some(s) = &pre.gene_scaling {
                let m = DMatrix::from_fn(2, s.len(), |i, j| if i == 0 { s[j].0 } else { s[j].1 });
                w.matrix("preprocess.gene_scaling", &m);
            }
        }
        None => w.kv("preprocess", "no"),
    }
    match &p.front.selected {
        Some(sel) => w.indices("front.selected", sel),
        None => w.kv("front.selected", "all"),
    }

    match &p.classifier {
        Classifier::PlsGlrLog(c) => {
            write_plsglr(&mut w, &c.model);
            w.vector("log.coefficients", c.coefficients.as_slice());
            w.kv("log.converged", c.link_converged);
        }
        Classifier::PlsGlrDa(c) => {
            write_plsglr(&mut w, &c.model);
            write_lda(&mut w, "lda", &c.lda);
        }
        Classifier::Knn(c) => {
            w.kv("knn.k", c.k);
            w.matrix("knn.train_x", &c.train_x);
            w.indices("knn.train_y", c.train_y.labels());
        }
        Classifier::Lda(c) => write_lda(&mut w, "lda", c),
        Classifier::PlsDa(c) => {
            w.vector("plsda.column_means", &c.column_means);
            w.matrix("plsda.weights", &c.weights);
            w.matrix("plsda.x_weights", &c.x_weights);
            w.matrix("plsda.loadings", &c.loadings);
            w.matrix("plsda.y_loadings", &c.y_loadings);
            w.matrix("plsda.components", &c.components);
            write_lda(&mut w, "lda", &c.lda);
        }
        Classifier::Kma(c) => {
            write_kernel(&mut w, &c.kernel);
            w.kv("kma.lambda", c.lambda);
            w.kv("kma.epsilon", c.epsilon);
            w.kv("kma.class_count", c.class_count);
            w.matrix("kma.gamma", &c.gamma);
            w.matrix("kma.train_x", &c.train_x);
        }
    }
    w.out.push_str("end\n");
    w.out
}

/// Parses a model file written by [`format_model`].
pub fn parse_model(text: &str) -> Result<FittedPipeline> {
    let r = Reader::parse(text)?;
    let method: Method = r.parsed("method")?;
    let classes: usize = r.parsed("classes")?;
    let class_names = (0..classes)
        .map(|i| r.value(&format!("class.{i}")).map(|(_, v)| v.to_string()))
        .collect::<Result<Vec<_>>>()?;
    let params = HyperParams {
        m: r.parsed("params.m")?,
        k: r.parsed("params.k")?,
        lambda: r.parsed("params.lambda")?,
        sigma_scale: r.parsed("params.sigma_scale")?,
        p_keep: r.optional("params.p_keep")?,
    };
    let preprocessor = match r.value("preprocess")? {
        (_, "yes") => {
            let config = PreprocessConfig {
                floor: r.parsed("preprocess.floor")?,
                ceil: r.parsed("preprocess.ceil")?,
                fold_min: r.parsed("preprocess.fold_min")?,
                span_min: r.parsed("preprocess.span_min")?,
                log_base: r.parsed("preprocess.log_base")?,
                standardize: r.parsed("preprocess.standardize")?,
            };
            config.validate()?;
            let gene_scaling = if r.has("preprocess.gene_scaling") {
                let m = r.matrix("preprocess.gene_scaling")?;
                Some((0..m.ncols()).map(|j| (m[(0, j)], m[(1, j)])).collect())
            } else {
                None
            };
            Some(Preprocessor {
                config,
                kept: r.indices("preprocess.kept")?,
                gene_scaling,
                input_genes: r.parsed("preprocess.input_genes")?,
            })
        }
        (_, "no") => None,
        (no, v) => return Err(bad(no, format!("preprocess must be yes or no, found {v:?}"))),
    };
    let selected = match r.get("front.selected")? {
        (_, Entry::Value(v)) if v == "all" => None,
        _ => Some(r.indices("front.selected")?),
    };
    let front = FrontEnd {
        preprocessor,
        selected,
        input_genes: r.parsed("front.input_genes")?,
    };
    let classifier = match method {
        Method::PlsGlrLog => Classifier::PlsGlrLog(PlsGlrLog {
            model: read_plsglr(&r)?,
            coefficients: DVector::from_vec(r.vector("log.coefficients")?),
            link_converged: r.parsed("log.converged")?,
        }),
        Method::PlsGlrDa => Classifier::PlsGlrDa(PlsGlrDa {
            model: read_plsglr(&r)?,
            lda: read_lda(&r, "lda")?,
        }),
        Method::Knn => Classifier::Knn(KnnModel {
            k: r.parsed("knn.k")?,
            train_x: r.matrix("knn.train_x")?,
            train_y: LabelVector::new(r.indices("knn.train_y")?, classes)?,
        }),
        Method::Lda => Classifier::Lda(read_lda(&r, "lda")?),
        Method::PlsDa => Classifier::PlsDa(PlsDaModel {
            column_means: r.vector("plsda.column_means")?,
            weights: r.matrix("plsda.weights")?,
            x_weights: r.matrix("plsda.x_weights")?,
            loadings: r.matrix("plsda.loadings")?,
            y_loadings: r.matrix("plsda.y_loadings")?,
            components: r.matrix("plsda.components")?,
            lda: read_lda(&r, "lda")?,
        }),
        Method::Kma => Classifier::Kma(KmaModel {
            kernel: read_kernel(&r)?,
            lambda: r.parsed("kma.lambda")?,
            epsilon: r.parsed("kma.epsilon")?,
            class_count: r.parsed("kma.class_count")?,
            gamma: r.matrix("kma.gamma")?,
            train_x: r.matrix("kma.train_x")?,
        }),
    };
    Ok(FittedPipeline {
        front,
        classifier,
        params,
        class_names,
    })
}

pub fn save_model(path: &Path, p: &FittedPipeline) -> Result<()> {
    std::fs::write(path, format_model(p)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<FittedPipeline> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_model(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{fit_pipeline, PipelineSpec};
    use crate::preprocess::Standardization;
    use crate::synthetic::{two_blobs, BlobConfig};

    fn blobs() -> crate::data::Dataset {
        two_blobs(&BlobConfig {
            n_samples: 24,
            n_genes: 30,
            informative: 5,
            separation: 3.0,
            seed: 2,
        })
        .unwrap()
    }

    #[test]
    fn every_method_round_trips() {
        let d = blobs();
        for method in Method::ALL {
            let mut spec = PipelineSpec::new(method);
            spec.params.p_keep = Some(10);
            let fitted = fit_pipeline(&d, &spec, 0).unwrap();
            let text = format_model(&fitted);
            let back = parse_model(&text).unwrap();
            assert_eq!(back, fitted, "{method}");
            assert_eq!(format_model(&back), text);
        }
    }

    #[test]
    fn preprocessed_round_trip() {
        let d = blobs();
        let raw = d.with_x(d.x.map_observed(|v| 1000.0 + 400.0 * v).unwrap()).unwrap();
        let mut spec = PipelineSpec::new(Method::Kma);
        spec.preprocess = Some(PreprocessConfig {
            fold_min: 1.01,
            span_min: 1.0,
            standardize: Standardization::PerGene,
            ..PreprocessConfig::default()
        });
        let fitted = fit_pipeline(&raw, &spec, 0).unwrap();
        let back = parse_model(&format_model(&fitted)).unwrap();
        assert_eq!(back.predict(&raw.x).unwrap(), fitted.predict(&raw.x).unwrap());
    }

    #[test]
    fn rejects_damaged_files() {
        assert!(matches!(parse_model("nope\n"), Err(Error::ModelFormat { .. })));
        let d = blobs();
        let text = format_model(&fit_pipeline(&d, &PipelineSpec::new(Method::Lda), 0).unwrap());
        assert!(parse_model(text.trim_end_matches("end\n")).is_err());
        let cut: String = text.lines().filter(|l| !l.starts_with("lda.ridge")).map(|l| format!("{l}\n")).collect();
        assert!(parse_model(&cut).is_err());
    }
}
