//! One function per subcommand. Each resolves its settings, does the work
//! through the core crate and writes its artifacts plus `provenance.txt`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hdclass_core::harness::{
    comparison_table, confusion_csv, cross_validate_repeated, fit_pipeline, folds_csv, format_rate, predictions_csv,
    summary_csv, EvalReport,
};
use hdclass_core::io::format_matrix;
use hdclass_core::model_io::{load_model, save_model};
use hdclass_core::preprocess::{box_stats, pca_scores, rle_quality, rle_stats, RleQualityConfig};
use hdclass_core::preprocess::preprocess;
use hdclass_core::select::{bss_wss_ranking, top_indices};
use hdclass_core::stats::BoxStats;
use hdclass_core::ExpressionMatrix;

use crate::config::Resolver;
use crate::settings::{self, checksum, write, write_provenance};
use crate::{Command, CommonArgs, CvCmd, DiagnoseCmd, PcaCmd, PredictCmd, PreprocessCmd, SelectCmd, TrainCmd};

pub const KEPT_SCHEMA: &str = "#schema=hdclass.kept_genes.v1";
pub const BOX_SCHEMA: &str = "#schema=hdclass.boxstats.v1";
pub const RLE_SCHEMA: &str = "#schema=hdclass.rle.v1";
pub const PCA_SCHEMA: &str = "#schema=hdclass.pca_scores.v1";
pub const RANKING_SCHEMA: &str = "#schema=hdclass.ranking.v1";
pub const LABELS_SCHEMA: &str = "#schema=hdclass.predicted_labels.v1";

pub fn run(common: &CommonArgs, command: Command) -> Result<()> {
    let file = settings::load_config(common)?;
    let name = match &command {
        Command::Preprocess(_) => "preprocess",
        Command::Rle(_) => "rle",
        Command::Boxstats(_) => "boxstats",
        Command::Pca(_) => "pca",
        Command::Select(_) => "select",
        Command::Cv(_) => "cv",
        Command::Train(_) => "train",
        Command::Predict(_) => "predict",
    };
    let mut r = Resolver::new(&file, name);
    let out = settings::output_dir(&mut r, common)?;
    match command {
        Command::Preprocess(c) => run_preprocess(&mut r, &out, c)?,
        Command::Rle(c) => run_boxes(&mut r, &out, c, true)?,
        Command::Boxstats(c) => run_boxes(&mut r, &out, c, false)?,
        Command::Pca(c) => run_pca(&mut r, &out, c)?,
        Command::Select(c) => run_select(&mut r, &out, c)?,
        Command::Cv(c) => run_cv(&mut r, &out, c)?,
        Command::Train(c) => run_train(&mut r, &out, c)?,
        Command::Predict(c) => run_predict(&mut r, &out, c)?,
    }
    write_provenance(&out, &r.finish())?;
    log::info!("artifacts written to {}", out.display());
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Columns kept from the input, by position and id.
fn kept_csv(input: &ExpressionMatrix, kept: &[usize]) -> String {
    let mut out = format!("{KEPT_SCHEMA}\nindex,gene\n");
    for &j in kept {
        let _ = writeln!(out, "{j},{}", csv_field(&input.gene_ids()[j]));
    }
    out
}

fn run_preprocess(r: &mut Resolver, out: &Path, c: PreprocessCmd) -> Result<()> {
    let x = settings::load_unlabelled(r, &c.input)?;
    r.note("preprocess.enabled", true);
    let cfg = settings::preprocess_config(r, &c.pre)?;
    let (reduced, kept) = preprocess(&x, &cfg)?;
    log::info!("kept {} of {} genes", kept.len(), x.ncols());
    write(out, "preprocessed.csv", &format_matrix(&reduced, ',', "NA"))?;
    write(out, "kept_genes.csv", &kept_csv(&x, &kept))
}

fn box_row(out: &mut String, sample: &str, b: &BoxStats) {
    let _ = write!(
        out,
        "{},{},{},{},{},{},{},{}",
        csv_field(sample),
        b.median,
        b.q1,
        b.q3,
        b.iqr,
        b.whisker_low,
        b.whisker_high,
        b.count
    );
}

fn run_boxes(r: &mut Resolver, out: &Path, c: DiagnoseCmd, rle: bool) -> Result<()> {
    let x = settings::load_unlabelled(r, &c.input)?;
    let (x, _) = settings::maybe_preprocess(r, c.preprocess, &c.pre, x)?;
    let draw = r.value("diagnostics.svg", c.svg, true)?;
    let names = x.sample_ids().to_vec();
    if rle {
        let d = RleQualityConfig::default();
        let quality = RleQualityConfig {
            center_tolerance: r.value("diagnostics.center_tolerance", c.center_tolerance, d.center_tolerance)?,
            width_max: r.value("diagnostics.width_max", c.width_max, d.width_max)?,
        };
        let summary = rle_stats(&x)?;
        let pass = rle_quality(&summary, &quality);
        let mut csv = format!("{RLE_SCHEMA}\nsample,median,q1,q3,iqr,whisker_low,whisker_high,count,pass\n");
        for ((name, b), ok) in names.iter().zip(&summary.per_sample).zip(&pass) {
            box_row(&mut csv, name, b);
            let _ = writeln!(csv, ",{ok}");
        }
        write(out, "rle.csv", &csv)?;
        if draw {
            let plot = crate::svg::box_plot("Relative log expression", "RLE", &names, &summary.per_sample, Some(0.0));
            write(out, "rle.svg", &plot)?;
        }
    } else {
        let stats = box_stats(&x)?;
        let mut csv = format!("{BOX_SCHEMA}\nsample,median,q1,q3,iqr,whisker_low,whisker_high,count\n");
        for (name, b) in names.iter().zip(&stats) {
            box_row(&mut csv, name, b);
            csv.push('\n');
        }
        write(out, "boxstats.csv", &csv)?;
        if draw {
            write(out, "boxstats.svg", &crate::svg::box_plot("Expression per sample", "value", &names, &stats, None))?;
        }
    }
    Ok(())
}

fn run_pca(r: &mut Resolver, out: &Path, c: PcaCmd) -> Result<()> {
    let labels = r.optional("input.labels", c.labels.clone())?;
    let (x, groups, group_names) = match labels {
        Some(l) => {
            let d = settings::load_labelled(r, &c.input, Some(l))?;
            (d.x, d.y.labels().to_vec(), d.class_names)
        }
        None => {
            let x = settings::load_unlabelled(r, &c.input)?;
            let n = x.nrows();
            (x, vec![0; n], vec!["samples".to_string()])
        }
    };
    let (x, _) = settings::maybe_preprocess(r, c.preprocess, &c.pre, x)?;
    let k = r.value("diagnostics.components", c.components, 2)?;
    let draw = r.value("diagnostics.svg", c.svg, true)?;
    let pca = pca_scores(&x, k)?;
    let explained: Vec<String> = pca.explained.iter().map(|e| e.to_string()).collect();
    let mut csv = format!("{PCA_SCHEMA}\n#explained_variance={}\nsample", explained.join(","));
    for j in 0..pca.scores.ncols() {
        let _ = write!(csv, ",pc{}", j + 1);
    }
    csv.push('\n');
    for (i, s) in x.sample_ids().iter().enumerate() {
        csv.push_str(&csv_field(s));
        for v in pca.scores.row(i).iter() {
            let _ = write!(csv, ",{v}");
        }
        csv.push('\n');
    }
    write(out, "pca_scores.csv", &csv)?;
    if draw && pca.scores.ncols() >= 2 {
        let points: Vec<(f64, f64)> = (0..pca.scores.nrows()).map(|i| (pca.scores[(i, 0)], pca.scores[(i, 1)])).collect();
        let axis = |j: usize| format!("PC{} ({:.1}%)", j + 1, 100.0 * pca.explained[j]);
        let plot = crate::svg::scatter("Principal components", (&axis(0), &axis(1)), &points, &groups, &group_names);
        write(out, "pca.svg", &plot)?;
    }
    Ok(())
}

fn run_select(r: &mut Resolver, out: &Path, c: SelectCmd) -> Result<()> {
    let d = settings::load_labelled(r, &c.input, c.labels.clone())?;
    let input = d.x.clone();
    let (x, kept) = settings::maybe_preprocess(r, c.preprocess, &c.pre, d.x.clone())?;
    let d = d.with_x(x)?;
    let p_keep = r.value("select.p_keep", c.p_keep, 50)?;
    if p_keep == 0 {
        bail!("p_keep must be positive");
    }
    let ranking = bss_wss_ranking(&d);
    let keep = p_keep.min(d.n_genes());
    if keep < p_keep {
        log::warn!("only {} genes available; keeping all of them", d.n_genes());
    }
    let mut csv = format!("{RANKING_SCHEMA}\nrank,index,gene,ratio\n");
    for (rank, &j) in ranking.order.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            rank + 1,
            kept[j],
            csv_field(&input.gene_ids()[kept[j]]),
            ranking.ratios[j]
        );
    }
    write(out, "ranking.csv", &csv)?;
    let top = top_indices(&ranking, keep)?;
    write(out, "selected.csv", &format_matrix(&d.x.select_columns(&top), ',', "NA"))?;
    let original: Vec<usize> = top.iter().map(|&j| kept[j]).collect();
    write(out, "selected_genes.csv", &kept_csv(&input, &original))
}

fn data_label(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "data".into())
}

fn run_cv(r: &mut Resolver, out: &Path, c: CvCmd) -> Result<()> {
    let methods = settings::methods(r, c.method.clone(), true)?;
    let d = settings::load_labelled(r, &c.input, c.model.labels.clone())?;
    let label = data_label(Path::new(r.recorded("input.data").unwrap_or("data")));
    let setup = settings::model_setup(r, &c.model)?;
    let k = r.value("cv.folds", c.k, 10)?;
    let repeats = r.value("cv.repeats", c.repeats, 1)?;
    if repeats == 0 {
        bail!("cv.repeats must be at least 1");
    }
    let mut per_method: Vec<Vec<EvalReport>> = Vec::new();
    for &m in &methods {
        log::info!("cross-validating {m}");
        let reports = cross_validate_repeated(&d, &setup.spec(m), k, setup.seed, repeats)
            .with_context(|| format!("method {m}"))?;
        for (i, rep) in reports.iter().enumerate() {
            r.note(&format!("result.{}.error_rate.{i}", m.label()), format_rate(rep.error_rate()));
        }
        per_method.push(reports);
    }
    // Rows grouped by repeat, then by method in the order given.
    let all: Vec<EvalReport> = (0..repeats)
        .flat_map(|i| per_method.iter().map(move |v| v[i].clone()))
        .collect();
    write(out, "report.csv", &summary_csv(&label, &all))?;
    write(out, "folds.csv", &folds_csv(&all))?;
    write(out, "predictions.csv", &predictions_csv(&all))?;
    write(out, "confusion.csv", &confusion_csv(&all))?;
    let first: Vec<EvalReport> = per_method.iter().map(|v| v[0].clone()).collect();
    let title = format!(
        "{k}-fold CV error rate (%), seed {}, selection {}",
        setup.seed, setup.selection
    );
    let mut table = comparison_table(&title, &[(label, first)]);
    if repeats > 1 {
        let _ = writeln!(table, "\nExtension: mean error rate (%) over {repeats} seeded splits (seeds {}..={})", setup.seed, setup.seed + repeats as u64 - 1);
        for (m, reports) in methods.iter().zip(&per_method) {
            let mean = reports.iter().map(EvalReport::error_rate).sum::<f64>() / repeats as f64;
            let _ = writeln!(table, "{:<12}{}", m.label(), format_rate(mean));
        }
    }
    write(out, "table.txt", &table)?;
    print!("{table}");
    Ok(())
}

fn run_train(r: &mut Resolver, out: &Path, c: TrainCmd) -> Result<()> {
    let method = settings::methods(r, c.method.clone(), false)?[0];
    let d = settings::load_labelled(r, &c.input, c.model.labels.clone())?;
    let setup = settings::model_setup(r, &c.model)?;
    let fitted = fit_pipeline(&d, &setup.spec(method), setup.seed)?;
    r.note("result.params", fitted.params.describe(method));
    r.note("result.genes_used", fitted.used_genes().len());
    save_model(&out.join("model.txt"), &fitted)?;
    Ok(())
}

fn run_predict(r: &mut Resolver, out: &Path, c: PredictCmd) -> Result<()> {
    let model: String = r.required("input.model", c.model.clone(), "model file (--model)")?;
    let model = PathBuf::from(model);
    checksum(r, "model", &model)?;
    let fitted = load_model(&model)?;
    let x = settings::load_unlabelled(r, &c.input)?;
    if x.ncols() != fitted.front.input_genes {
        bail!(hdclass_core::Error::Shape(format!(
            "model was trained on {} genes but {} has {}",
            fitted.front.input_genes,
            model_input_name(r),
            x.ncols()
        )));
    }
    let predicted = fitted.predict(&x)?;
    let mut csv = format!("{LABELS_SCHEMA}\nsample,predicted\n");
    for (s, &p) in x.sample_ids().iter().zip(&predicted) {
        let _ = writeln!(csv, "{},{}", csv_field(s), csv_field(&fitted.class_names[p]));
    }
    write(out, "predictions.csv", &csv)
}

fn model_input_name(r: &Resolver) -> String {
    r.recorded("input.data").unwrap_or("the input").to_string()
}
