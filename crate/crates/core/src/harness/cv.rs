use rayon::prelude::*;

use super::folds::{stratified_kfold, stratified_kfold_relaxed, FoldAssignment};
use super::pipeline::{fit_classifiers, FittedPipeline, HyperParams, PipelineSpec, RankedBase, SelectionMode};
use super::report::{EvalReport, FoldResult};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Which evaluation a fit belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitScope {
    /// Fitted once on the whole dataset (global selection or final training).
    Whole,
    /// Fitted inside outer fold `f`.
    Fold(usize),
}

/// Called with every dataset a fit is allowed to see, before fitting.
pub type FitObserver<'a> = &'a (dyn Fn(FitScope, &Dataset) + Sync);

fn silent(_: FitScope, _: &Dataset) {}

/// Misclassified percentage.
pub fn error_rate(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    let wrong = predicted.iter().zip(truth).filter(|(p, t)| p != t).count();
    Ok(100.0 * wrong as f64 / truth.len() as f64)
}

/// Inner-CV error counts of every grid point, simplest first.
#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: HyperParams,
    /// Misclassified inner held-out samples per point; `None` when fitting failed.
    pub table: Vec<(HyperParams, Option<usize>)>,
}

fn inner_seed(seed: u64, scope: FitScope) -> u64 {
    let salt = match scope {
        FitScope::Whole => 0,
        FitScope::Fold(f) => f as u64 + 1,
    };
    seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn inner_folds(d: &Dataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    let smallest = d.y.class_counts().into_iter().min().unwrap_or(0);
    let k = k.min(smallest.max(2));
    match stratified_kfold(&d.y, k, seed) {
        Ok(f) => Ok(f),
        Err(_) => stratified_kfold_relaxed(&d.y, k, seed),
    }
}

/// Base for fitting on `train`: learned from `train` in-fold, or reused
/// from the whole data under global selection.
fn base_for(train: &Dataset, spec: &PipelineSpec, global: Option<&RankedBase>, need_ranking: bool) -> Result<RankedBase> {
    match global {
        Some(g) => g.restrict(train),
        None => RankedBase::fit(train, spec.preprocess.as_ref(), need_ranking),
    }
}

fn wants_ranking(points: &[HyperParams]) -> bool {
    points.iter().any(|p| p.p_keep.is_some())
}

/// Errors on `test` for every point, sharing fronts across equal `p_keep`.
fn score_points(
    train: &Dataset,
    test: &Dataset,
    spec: &PipelineSpec,
    points: &[HyperParams],
    global: Option<&RankedBase>,
) -> Vec<Option<usize>> {
    let base = match base_for(train, spec, global, wants_ranking(points)) {
        Ok(b) => b,
        Err(e) => {
            log::warn!("grid evaluation failed: {e}");
            return vec![None; points.len()];
        }
    };
    let mut out = vec![None; points.len()];
    let mut p_keeps: Vec<Option<usize>> = points.iter().map(|p| p.p_keep).collect();
    p_keeps.dedup();
    for pk in p_keeps {
        let idx: Vec<usize> = (0..points.len()).filter(|&i| points[i].p_keep == pk).collect();
        let group: Vec<HyperParams> = idx.iter().map(|&i| points[i]).collect();
        let prepared = base.front(pk).and_then(|front| {
            let view = base.training_view(&front);
            let x_test = front.apply(&test.x)?;
            Ok((view, x_test))
        });
        let (view, x_test) = match prepared {
            Ok(v) => v,
            Err(e) => {
                log::warn!("grid evaluation failed for p_keep {pk:?}: {e}");
                continue;
            }
        };
        for (slot, fitted) in idx.iter().zip(fit_classifiers(&view, spec.method, &spec.settings, &group)) {
            match fitted.and_then(|c| c.predict(&x_test)) {
                Ok(pred) => {
                    out[*slot] = Some(pred.iter().zip(test.y.labels()).filter(|(p, t)| p != t).count());
                }
                Err(e) => log::warn!("grid point {:?} failed: {e}", points[*slot]),
            }
        }
    }
    out
}

fn search(
    d: &Dataset,
    spec: &PipelineSpec,
    points: &[HyperParams],
    seed: u64,
    scope: FitScope,
    global: Option<&RankedBase>,
    observer: FitObserver,
) -> Result<GridResult> {
    if points.len() == 1 {
        return Ok(GridResult {
            best: points[0],
            table: vec![(points[0], None)],
        });
    }
    let folds = inner_folds(d, spec.inner_folds, inner_seed(seed, scope))?;
    let per_fold: Vec<Vec<Option<usize>>> = (0..folds.k)
        .into_par_iter()
        .map(|f| {
            let train = d.select_rows(&folds.train_indices(f))?;
            let test = d.select_rows(&folds.test_indices(f))?;
            observer(scope, &train);
            Ok(score_points(&train, &test, spec, points, global))
        })
        .collect::<Result<_>>()?;
    let table: Vec<(HyperParams, Option<usize>)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let total = per_fold.iter().try_fold(0usize, |acc, f| f[i].map(|w| acc + w));
            (*p, total)
        })
        .collect();
    // Points are ordered simplest first, so strict improvement keeps ties simple.
    let mut best: Option<(usize, HyperParams)> = None;
    for (p, w) in &table {
        if let Some(w) = w {
            if best.map_or(true, |(b, _)| *w < b) {
                best = Some((*w, *p));
            }
        }
    }
    let best = best
        .ok_or_else(|| Error::Numerical("every hyperparameter setting failed during inner cross-validation".into()))?
        .1;
    Ok(GridResult { best, table })
}

/// Nested-CV hyperparameter search on `d` with `spec.inner_folds` folds.
pub fn grid_search(d: &Dataset, spec: &PipelineSpec, seed: u64) -> Result<GridResult> {
    grid_search_observed(d, spec, seed, &silent)
}

pub fn grid_search_observed(d: &Dataset, spec: &PipelineSpec, seed: u64, observer: FitObserver) -> Result<GridResult> {
    let points = match &spec.grid {
        Some(g) => g.points()?,
        None => vec![spec.params],
    };
    let global = global_base(d, spec, &points, observer)?;
    search(d, spec, &points, seed, FitScope::Whole, global.as_ref(), observer)
}

fn global_base(d: &Dataset, spec: &PipelineSpec, points: &[HyperParams], observer: FitObserver) -> Result<Option<RankedBase>> {
    match spec.selection {
        SelectionMode::Global => {
            observer(FitScope::Whole, d);
            Ok(Some(RankedBase::fit(d, spec.preprocess.as_ref(), wants_ranking(points))?))
        }
        SelectionMode::InFold => Ok(None),
    }
}

fn fit_with(
    train: &Dataset,
    spec: &PipelineSpec,
    params: HyperParams,
    global: Option<&RankedBase>,
) -> Result<FittedPipeline> {
    let base = base_for(train, spec, global, params.p_keep.is_some())?;
    let front = base.front(params.p_keep)?;
    let view = base.training_view(&front);
    let classifier = fit_classifiers(&view, spec.method, &spec.settings, &[params])
        .pop()
        .expect("one point fitted")?;
    Ok(FittedPipeline {
        front,
        classifier,
        params,
        class_names: train.class_names.clone(),
    })
}

/// Tunes (when a grid is given) and fits the pipeline on all of `d`.
pub fn fit_pipeline(d: &Dataset, spec: &PipelineSpec, seed: u64) -> Result<FittedPipeline> {
    fit_pipeline_observed(d, spec, seed, &silent)
}

pub fn fit_pipeline_observed(d: &Dataset, spec: &PipelineSpec, seed: u64, observer: FitObserver) -> Result<FittedPipeline> {
    let points = match &spec.grid {
        Some(g) => g.points()?,
        None => vec![spec.params],
    };
    let global = global_base(d, spec, &points, observer)?;
    let best = search(d, spec, &points, seed, FitScope::Whole, global.as_ref(), observer)?.best;
    observer(FitScope::Whole, d);
    fit_with(d, spec, best, global.as_ref())
}

pub fn cross_validate(d: &Dataset, spec: &PipelineSpec, folds: &FoldAssignment) -> Result<EvalReport> {
    cross_validate_observed(d, spec, folds, &silent)
}

/// Evaluates `spec` over `folds`; each outer fold tunes and fits on its
/// training rows only (up to the global front end under global selection).
pub fn cross_validate_observed(
    d: &Dataset,
    spec: &PipelineSpec,
    folds: &FoldAssignment,
    observer: FitObserver,
) -> Result<EvalReport> {
    if folds.fold_of.len() != d.n_samples() {
        return Err(Error::Shape(format!(
            "fold assignment covers {} samples, dataset has {}",
            folds.fold_of.len(),
            d.n_samples()
        )));
    }
    let points = match &spec.grid {
        Some(g) => g.points()?,
        None => vec![spec.params],
    };
    let global = global_base(d, spec, &points, observer)?;
    let results: Vec<(Vec<usize>, Vec<usize>, HyperParams)> = (0..folds.k)
        .into_par_iter()
        .map(|f| {
            let run = || -> Result<_> {
                let test_idx = folds.test_indices(f);
                let train = d.select_rows(&folds.train_indices(f))?;
                let scope = FitScope::Fold(f);
                let best = search(&train, spec, &points, folds.seed, scope, global.as_ref(), observer)?.best;
                observer(scope, &train);
                let fitted = fit_with(&train, spec, best, global.as_ref())?;
                let pred = fitted.predict(&d.x.select_rows(&test_idx))?;
                Ok((test_idx, pred, best))
            };
            run().map_err(|e| e.in_fold(f))
        })
        .collect::<Result<_>>()?;

    let mut predictions = vec![0; d.n_samples()];
    let mut fold_results = Vec::with_capacity(folds.k);
    for (f, (test_idx, pred, params)) in results.into_iter().enumerate() {
        let mut wrong = 0;
        for (&i, &p) in test_idx.iter().zip(&pred) {
            predictions[i] = p;
            wrong += usize::from(p != d.y.labels()[i]);
        }
        fold_results.push(FoldResult {
            fold: f,
            tested: test_idx.len(),
            wrong,
            params,
        });
    }
    Ok(EvalReport {
        method: spec.method,
        selection: spec.selection,
        seed: folds.seed,
        k: folds.k,
        sample_ids: d.x.sample_ids().to_vec(),
        class_names: d.class_names.clone(),
        truth: d.y.labels().to_vec(),
        predictions,
        fold_of: folds.fold_of.clone(),
        folds: fold_results,
    })
}

/// Independent seeded repeats of stratified `k`-fold CV (seeds `seed`,
/// `seed + 1`, …).
pub fn cross_validate_repeated(
    d: &Dataset,
    spec: &PipelineSpec,
    k: usize,
    seed: u64,
    repeats: usize,
) -> Result<Vec<EvalReport>> {
    (0..repeats as u64)
        .map(|r| cross_validate(d, spec, &stratified_kfold(&d.y, k, seed.wrapping_add(r))?))
        .collect()
}
