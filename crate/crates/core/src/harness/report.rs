use std::fmt::Write as _;

use super::pipeline::{HyperParams, Method, SelectionMode};

pub const REPORT_SCHEMA: &str = "#schema=hdclass.eval_report.v1";
pub const FOLDS_SCHEMA: &str = "#schema=hdclass.eval_folds.v1";
pub const PREDICTIONS_SCHEMA: &str = "#schema=hdclass.eval_predictions.v1";
pub const CONFUSION_SCHEMA: &str = "#schema=hdclass.confusion.v1";

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub tested: usize,
    pub wrong: usize,
    /// Settings chosen by the inner search for this fold.
    pub params: HyperParams,
}

/// Outcome of one cross-validated method.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: Method,
    pub selection: SelectionMode,
    pub seed: u64,
    pub k: usize,
    pub sample_ids: Vec<String>,
    pub class_names: Vec<String>,
    pub truth: Vec<usize>,
    /// Held-out prediction of every sample.
    pub predictions: Vec<usize>,
    pub fold_of: Vec<usize>,
    pub folds: Vec<FoldResult>,
}

impl EvalReport {
    pub fn n(&self) -> usize {
        self.truth.len()
    }

    pub fn misclassified(&self) -> usize {
        self.folds.iter().map(|f| f.wrong).sum()
    }

    pub fn error_rate(&self) -> f64 {
        100.0 * self.misclassified() as f64 / self.n() as f64
    }

    /// `confusion[truth][predicted]` counts.
    pub fn confusion(&self) -> Vec<Vec<usize>> {
        let c = self.class_names.len();
        let mut m = vec![vec![0; c]; c];
        for (&t, &p) in self.truth.iter().zip(&self.predictions) {
            m[t][p] += 1;
        }
        m
    }
}

/// One decimal, halves rounded away from zero.
pub fn format_rate(rate: f64) -> String {
    format!("{:.1}", (rate * 10.0).round() / 10.0)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per report: data label, method and overall error.
pub fn summary_csv(data: &str, reports: &[EvalReport]) -> String {
    let mut out = format!("{REPORT_SCHEMA}\ndata,method,selection,seed,folds,n,misclassified,error_rate\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            csv_field(data),
            r.method,
            r.selection,
            r.seed,
            r.k,
            r.n(),
            r.misclassified(),
            format_rate(r.error_rate())
        );
    }
    out
}

pub fn folds_csv(reports: &[EvalReport]) -> String {
    let mut out = format!("{FOLDS_SCHEMA}\nmethod,fold,tested,wrong,params\n");
    for r in reports {
        for f in &r.folds {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.method,
                f.fold,
                f.tested,
                f.wrong,
                csv_field(&f.params.describe(r.method))
            );
        }
    }
    out
}

pub fn predictions_csv(reports: &[EvalReport]) -> String {
    let mut out = format!("{PREDICTIONS_SCHEMA}\nmethod,sample,fold,truth,predicted\n");
    for r in reports {
        for i in 0..r.n() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.method,
                csv_field(&r.sample_ids[i]),
                r.fold_of[i],
                csv_field(&r.class_names[r.truth[i]]),
                csv_field(&r.class_names[r.predictions[i]])
            );
        }
    }
    out
}

pub fn confusion_csv(reports: &[EvalReport]) -> String {
    let mut out = format!("{CONFUSION_SCHEMA}\nmethod,truth,predicted,count\n");
    for r in reports {
        for (t, row) in r.confusion().iter().enumerate() {
            for (p, &count) in row.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{count}",
                    r.method,
                    csv_field(&r.class_names[t]),
                    csv_field(&r.class_names[p])
                );
            }
        }
    }
    out
}

/// Aligned error-rate table: one row per dataset, one column per method in
/// the fixed method order, `-` where a method was not run.
pub fn comparison_table(title: &str, rows: &[(String, Vec<EvalReport>)]) -> String {
    let methods: Vec<Method> = Method::ALL
        .into_iter()
        .filter(|m| rows.iter().any(|(_, rs)| rs.iter().any(|r| r.method == *m)))
        .collect();
    let mut cells: Vec<Vec<String>> = vec![std::iter::once("DATA".to_string())
        .chain(methods.iter().map(|m| m.label().to_string()))
        .collect()];
    for (name, reports) in rows {
        let mut line = vec![name.clone()];
        for m in &methods {
            line.push(
                reports
                    .iter()
                    .find(|r| r.method == *m)
                    .map_or_else(|| "-".to_string(), |r| format_rate(r.error_rate())),
            );
        }
        cells.push(line);
    }
    let widths: Vec<usize> = (0..cells[0].len())
        .map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = format!("{title}\n");
    for (i, row) in cells.iter().enumerate() {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c == 0 {
                let _ = write!(line, "{cell:<w$}", w = widths[c]);
            } else {
                let _ = write!(line, "  {cell:>w$}", w = widths[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
        if i == 0 {
            out.push_str(&"-".repeat(line.trim_end().len()));
            out.push('\n');
        }
    }
    out
}
