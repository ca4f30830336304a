use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hdclass_core::io::{format_labels, format_matrix};
use hdclass_core::synthetic::{two_blobs, BlobConfig};
use hdclass_core::{Dataset, ExpressionMatrix};
use tempfile::TempDir;

fn hdclass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdclass"))
        .args(args)
        .env_remove("HDCLASS_OUT")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn blobs(n: usize, p: usize) -> Dataset {
    two_blobs(&BlobConfig {
        n_samples: n,
        n_genes: p,
        informative: 8.min(p),
        separation: 4.0,
        seed: 3,
    })
    .unwrap()
}

/// Writes `d` as data.csv / labels.txt under `dir`.
fn write_dataset(dir: &Path, d: &Dataset) -> (String, String) {
    let data = dir.join("data.csv");
    let labels = dir.join("labels.txt");
    fs::write(&data, format_matrix(&d.x, ',', "NA")).unwrap();
    fs::write(&labels, format_labels(d)).unwrap();
    (data.display().to_string(), labels.display().to_string())
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

fn read(dir: &str, name: &str) -> String {
    fs::read_to_string(PathBuf::from(dir).join(name)).unwrap()
}

/// Positive raw intensities: 10^(3 + blob value / 2).
fn raw_intensities(d: &Dataset) -> Dataset {
    let x = d.x.values().map(|v| 10f64.powf(3.0 + v / 2.0));
    let em = ExpressionMatrix::new(x, d.x.gene_ids().to_vec(), d.x.sample_ids().to_vec()).unwrap();
    d.with_x(em).unwrap()
}

#[test]
fn unknown_flag_exits_two() {
    let o = hdclass(&["cv", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cv_writes_reproducible_reports() {
    let tmp = TempDir::new().unwrap();
    let (data, labels) = write_dataset(tmp.path(), &blobs(30, 40));
    let (a, b) = (path(&tmp, "a"), path(&tmp, "b"));
    for out in [&a, &b] {
        let o = hdclass(&[
            "cv", "--method", "kma", "--data", &data, "--labels", &labels, "--k", "5", "--seed", "7", "--out", out,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let report = read(&a, "report.csv");
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "#schema=hdclass.eval_report.v1");
    assert_eq!(lines.len(), 3, "one header and one data row: {report}");
    assert!(lines[2].starts_with("data,KMA,in-fold,7,5,30,"));
    for f in ["report.csv", "folds.csv", "predictions.csv", "confusion.csv", "table.txt"] {
        assert_eq!(read(&a, f), read(&b, f), "{f} differs between identical runs");
    }
    let prov = read(&a, "provenance.txt");
    assert!(prov.contains("seed = 7") && prov.contains("cv.folds = 5"));
    assert!(prov.contains("checksum.data = sha256:") && prov.contains("checksum.labels = sha256:"));
    assert!(prov.contains("classifier.lambda = 0.001,0.01,0.1,1,10,100,1000"));
}

#[test]
fn provenance_reruns_the_command() {
    let tmp = TempDir::new().unwrap();
    let (data, labels) = write_dataset(tmp.path(), &blobs(24, 30));
    let first = path(&tmp, "first");
    let o = hdclass(&[
        "cv", "--method", "knn,lda", "--data", &data, "--labels", &labels, "--k", "4", "--seed", "11", "--out", &first,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let again = path(&tmp, "again");
    let prov = PathBuf::from(&first).join("provenance.txt").display().to_string();
    let o = hdclass(&["cv", "--config", &prov, "--out", &again]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["report.csv", "folds.csv", "predictions.csv", "confusion.csv"] {
        assert_eq!(read(&first, f), read(&again, f));
    }
}

#[test]
fn flags_override_config_file() {
    let tmp = TempDir::new().unwrap();
    let (data, labels) = write_dataset(tmp.path(), &blobs(24, 20));
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, format!("# test run\ninput.data = {data}\ninput.labels = {labels}\ncv.folds = 3\nseed = 5\n")).unwrap();
    let out = path(&tmp, "o");
    let o = hdclass(&["cv", "--config", &cfg.display().to_string(), "--method", "lda", "--k", "4", "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let prov = read(&out, "provenance.txt");
    assert!(prov.contains("cv.folds = 4") && prov.contains("seed = 5"));

    fs::write(&cfg, "cv.fold = 3\n").unwrap();
    let o = hdclass(&["cv", "--config", &cfg.display().to_string(), "--method", "lda", "--out", &out]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn train_then_predict_round_trips() {
    let tmp = TempDir::new().unwrap();
    let d = blobs(30, 40);
    let (data, labels) = write_dataset(tmp.path(), &d);
    let model_dir = path(&tmp, "model");
    let o = hdclass(&[
        "train", "--method", "plsglr-log", "--data", &data, "--labels", &labels, "--m", "1", "--out", &model_dir,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let model = PathBuf::from(&model_dir).join("model.txt").display().to_string();
    let pred = path(&tmp, "pred");
    let o = hdclass(&["predict", "--model", &model, "--data", &data, "--out", &pred]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(&pred, "predictions.csv");
    let predicted: Vec<&str> = csv.lines().skip(2).map(|l| l.split(',').nth(1).unwrap()).collect();
    let truth: Vec<&str> = d.y.labels().iter().map(|&l| d.class_names[l].as_str()).collect();
    let wrong = predicted.iter().zip(&truth).filter(|(p, t)| p != t).count();
    assert!(wrong <= 1, "{wrong} training samples misclassified");
    assert!(read(&pred, "provenance.txt").contains("checksum.model = sha256:"));
}

#[test]
fn predict_with_wrong_gene_count_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let (data, labels) = write_dataset(tmp.path(), &blobs(20, 30));
    let model_dir = path(&tmp, "model");
    let o = hdclass(&["train", "--method", "knn", "--data", &data, "--labels", &labels, "--out", &model_dir]);
    assert!(o.status.success(), "{}", stderr(&o));
    let narrow = tmp.path().join("narrow.csv");
    fs::write(&narrow, format_matrix(&blobs(20, 25).x, ',', "NA")).unwrap();
    let model = PathBuf::from(&model_dir).join("model.txt").display().to_string();
    let o = hdclass(&["predict", "--model", &model, "--data", &narrow.display().to_string(), "--out", &path(&tmp, "p")]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: kind=data code=3:"));
    assert!(err.contains("30 genes") && err.contains("25"), "{err}");
}

#[test]
fn label_mismatch_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let (data, _) = write_dataset(tmp.path(), &blobs(20, 10));
    let labels = tmp.path().join("short.txt");
    fs::write(&labels, "a\nb\na\n").unwrap();
    let o = hdclass(&["cv", "--method", "knn", "--data", &data, "--labels", &labels.display().to_string(), "--out", &path(&tmp, "o")]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn singular_covariance_is_a_numerical_error() {
    // Two identical genes: the pooled covariance is singular without a ridge.
    let tmp = TempDir::new().unwrap();
    let mut text = String::from("sample,g1,g2\n");
    for i in 0..20 {
        let v = (i % 2) as f64 + 0.1 * i as f64;
        text.push_str(&format!("s{i},{v},{v}\n"));
    }
    let data = tmp.path().join("data.csv");
    fs::write(&data, text).unwrap();
    let labels = tmp.path().join("labels.txt");
    fs::write(&labels, (0..20).map(|i| if i % 2 == 0 { "a\n" } else { "b\n" }).collect::<String>()).unwrap();
    let o = hdclass(&[
        "train", "--method", "lda", "--data", &data.display().to_string(), "--labels", &labels.display().to_string(),
        "--out", &path(&tmp, "o"),
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error: kind=numerical code=4:"));
}

#[test]
fn preprocess_writes_matrix_and_kept_genes() {
    let tmp = TempDir::new().unwrap();
    let (data, _) = write_dataset(tmp.path(), &raw_intensities(&blobs(20, 30)));
    let out = path(&tmp, "pre");
    let o = hdclass(&["preprocess", "--data", &data, "--fold-min", "1.5", "--span-min", "10", "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let kept = read(&out, "kept_genes.csv");
    assert!(kept.starts_with("#schema=hdclass.kept_genes.v1\nindex,gene\n"));
    let n_kept = kept.lines().count() - 2;
    assert!(n_kept > 0);
    let matrix = read(&out, "preprocessed.csv");
    assert_eq!(matrix.lines().count(), 21);
    assert_eq!(matrix.lines().next().unwrap().split(',').count(), n_kept + 1);
    let prov = read(&out, "provenance.txt");
    assert!(prov.contains("preprocess.fold_min = 1.5") && prov.contains("preprocess.floor = 100"));
}

#[test]
fn diagnostics_write_csv_and_svg_deterministically() {
    let tmp = TempDir::new().unwrap();
    let (data, labels) = write_dataset(tmp.path(), &blobs(12, 15));
    for (cmd, files) in [
        ("rle", vec!["rle.csv", "rle.svg"]),
        ("boxstats", vec!["boxstats.csv", "boxstats.svg"]),
        ("pca", vec!["pca_scores.csv", "pca.svg"]),
    ] {
        let (a, b) = (path(&tmp, &format!("{cmd}1")), path(&tmp, &format!("{cmd}2")));
        for out in [&a, &b] {
            let mut args = vec![cmd, "--data", data.as_str(), "--out", out.as_str()];
            if cmd == "pca" {
                args.extend(["--labels", labels.as_str()]);
            }
            let o = hdclass(&args);
            assert!(o.status.success(), "{cmd}: {}", stderr(&o));
        }
        for f in files {
            assert_eq!(read(&a, f), read(&b, f), "{cmd} {f}");
        }
        let csv = read(&a, &format!("{}.csv", if cmd == "pca" { "pca_scores" } else { cmd }));
        assert!(csv.starts_with("#schema=hdclass."));
    }
    let rle = read(&path(&tmp, "rle1"), "rle.csv");
    assert_eq!(rle.lines().count(), 14);
    let pca = read(&path(&tmp, "pca1"), "pca_scores.csv");
    assert!(pca.lines().nth(1).unwrap().starts_with("#explained_variance="));
}

#[test]
fn select_ranks_informative_genes_first() {
    let tmp = TempDir::new().unwrap();
    let (data, labels) = write_dataset(tmp.path(), &blobs(30, 50));
    let out = path(&tmp, "sel");
    let o = hdclass(&["select", "--data", &data, "--labels", &labels, "--p-keep", "8", "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ranking = read(&out, "ranking.csv");
    assert_eq!(ranking.lines().count(), 52);
    let top: Vec<usize> = ranking
        .lines()
        .skip(2)
        .take(8)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(top.iter().all(|&j| j < 8), "informative genes are the first 8: {top:?}");
    assert_eq!(read(&out, "selected.csv").lines().next().unwrap().split(',').count(), 9);
}

#[test]
fn output_directory_defaults_to_environment() {
    let tmp = TempDir::new().unwrap();
    let (data, _) = write_dataset(tmp.path(), &blobs(10, 6));
    let out = tmp.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_hdclass"))
        .args(["boxstats", "--data", &data, "--svg", "false"])
        .env("HDCLASS_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("boxstats.csv").exists() && !out.join("boxstats.svg").exists());
}

#[test]
fn repeats_are_labelled_as_an_extension() {
    let tmp = TempDir::new().unwrap();
    let (data, labels) = write_dataset(tmp.path(), &blobs(20, 10));
    let out = path(&tmp, "rep");
    let o = hdclass(&[
        "cv", "--method", "lda", "--data", &data, "--labels", &labels, "--k", "4", "--repeats", "3", "--out", &out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read(&out, "report.csv").lines().count(), 5);
    assert!(read(&out, "table.txt").contains("Extension: mean error rate"));
}
