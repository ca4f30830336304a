//! PLS generalized linear regression.
//!
//! Components are built one at a time. For component `h` every gene gets the
//! GLM coefficient of `y ~ 1 + t_1 + … + t_{h-1} + x_j`; the coefficient
//! vector, normalized, weights the residual matrix left after regressing `X`
//! on the earlier components. Each sample's component score is the
//! no-intercept least-squares slope of its residual row on the weights,
//! taken over the genes observed for that sample, so missing cells are
//! simply skipped.
//!
//! Two classifiers sit on top of the components: a logistic regression
//! ([`PlsGlrLog`]) and a linear discriminant ([`PlsGlrDa`]).

use nalgebra::{DMatrix, DVector};

use crate::baselines::{fit_lda, LdaModel};
use crate::data::{center_columns, Dataset, ExpressionMatrix};
use crate::error::{Error, Result};
use crate::glm::{fit_glm, univariate_slope_batch, Family, GlmFit, GlmOptions, SlopeStatus};
use crate::stats::{quantile_sorted, sorted};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractOptions {
    pub family: Family,
    /// Slopes with a Wald p-value above this are zeroed; `None` keeps all.
    pub sparsify_p_threshold: Option<f64>,
    /// Stop before `m` once a component has no significant slope left.
    pub stop_when_insignificant: bool,
    pub glm: GlmOptions,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            family: Family::Binomial,
            sparsify_p_threshold: Some(0.05),
            stop_when_insignificant: true,
            glm: GlmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlsGlrModel {
    /// `p × m` unit-norm weights, one column per component.
    pub weights: DMatrix<f64>,
    /// `p × m` weights on the centered input: `T = (X - means) · x_weights`.
    pub x_weights: DMatrix<f64>,
    /// `p × m` deflation loadings.
    pub loadings: DMatrix<f64>,
    /// `n × m` training components.
    pub components: DMatrix<f64>,
    pub column_means: Vec<f64>,
    pub family: Family,
    pub sparsify_p_threshold: Option<f64>,
    /// Training rows with no observed gene carrying weight for some
    /// component; their score for it is 0.
    pub undetermined_rows: Vec<usize>,
}

/// Applies the separation policy: slopes from non-converged fits are
/// clipped in magnitude at the 99th percentile of the converged ones.
fn clip_unconverged(slopes: &mut [f64], status: &[SlopeStatus]) {
    let converged = sorted(
        slopes
            .iter()
            .zip(status)
            .filter(|(_, s)| **s == SlopeStatus::Converged)
            .map(|(a, _)| a.abs()),
    );
    if converged.is_empty() {
        return;
    }
    let cap = quantile_sorted(&converged, 0.99);
    for (a, s) in slopes.iter_mut().zip(status) {
        if *s == SlopeStatus::NotConverged && a.abs() > cap {
            *a = cap.copysign(*a);
        }
    }
}

fn normalize_with_sign(mut a: DVector<f64>) -> DVector<f64> {
    let norm = a.norm();
    a /= norm;
    let lead = a.iter().copied().fold(0.0f64, |x, y| if y.abs() > x.abs() { y } else { x });
    if lead < 0.0 {
        a.neg_mut();
    }
    a
}

/// Score of each row on `w`: `Σ r_ij w_j / Σ w_j²` over that row's observed
/// cells. Returns `None` for rows where the denominator vanishes.
fn slope_scores(resid: &DMatrix<f64>, observed: &DMatrix<bool>, w: &DVector<f64>) -> Vec<Option<f64>> {
    (0..resid.nrows())
        .map(|i| {
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..resid.ncols() {
                if observed[(i, j)] && w[j] != 0.0 {
                    num += resid[(i, j)] * w[j];
                    den += w[j] * w[j];
                }
            }
            (den > 0.0).then(|| num / den)
        })
        .collect()
}

/// Response as reals: class labels for binomial must be two-class.
pub fn response_for(d: &Dataset, family: Family) -> Result<Vec<f64>> {
    if family == Family::Binomial && d.class_count() != 2 {
        return Err(Error::InvalidArgument(format!(
            "binomial PLSGLR needs two classes, got {}",
            d.class_count()
        )));
    }
    Ok(d.y.labels().iter().map(|&l| l as f64).collect())
}

/// Extracts up to `m` components of `x` for response `y`.
pub fn extract_components(
    x: &ExpressionMatrix,
    y: &[f64],
    m: usize,
    opts: &ExtractOptions,
) -> Result<PlsGlrModel> {
    let (n, p) = (x.nrows(), x.ncols());
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one component".into()));
    }
    if y.len() != n {
        return Err(Error::CountMismatch {
            samples: n,
            labels: y.len(),
        });
    }
    let (xc, column_means) = center_columns(x)?;
    let observed = xc.mask().clone();
    let mut resid = xc.values().clone();

    let mut weights: Vec<DVector<f64>> = Vec::new();
    let mut x_weights: Vec<DVector<f64>> = Vec::new();
    let mut loadings: Vec<DVector<f64>> = Vec::new();
    let mut components = DMatrix::<f64>::zeros(n, 0);
    let mut undetermined = vec![false; n];

    for h in 0..m {
        let slopes = univariate_slope_batch(&xc, &components, y, opts.family, &opts.glm)?;
        let mut a: Vec<f64> = slopes.iter().map(|s| s.slope).collect();
        let status: Vec<SlopeStatus> = slopes.iter().map(|s| s.status).collect();
        clip_unconverged(&mut a, &status);

        let full = DVector::from_vec(a);
        let sparse = match opts.sparsify_p_threshold {
            Some(thr) => DVector::from_fn(p, |j, _| {
                // Separated fits have inflated standard errors, not weak effects.
                if slopes[j].p_value > thr && slopes[j].status != SlopeStatus::NotConverged {
                    0.0
                } else {
                    full[j]
                }
            }),
            None => full.clone(),
        };
        let a_h = if sparse.iter().any(|&v| v != 0.0) {
            sparse
        } else if h > 0 && opts.stop_when_insignificant {
            break;
        } else if full.iter().any(|&v| v != 0.0) {
            full
        } else if h == 0 {
            return Err(Error::NoSignal);
        } else {
            break;
        };

        let w = normalize_with_sign(a_h);
        let t: DVector<f64> = DVector::from_iterator(
            n,
            slope_scores(&resid, &observed, &w)
                .into_iter()
                .enumerate()
                .map(|(i, s)| {
                    s.unwrap_or_else(|| {
                        undetermined[i] = true;
                        0.0
                    })
                }),
        );

        // Column-wise available-case regression of the residuals on t.
        let loading = DVector::from_fn(p, |j, _| {
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..n {
                if observed[(i, j)] {
                    num += resid[(i, j)] * t[i];
                    den += t[i] * t[i];
                }
            }
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        });
        for j in 0..p {
            for i in 0..n {
                if observed[(i, j)] {
                    resid[(i, j)] -= t[i] * loading[j];
                }
            }
        }

        let mut wstar = w.clone();
        for (ws, pl) in x_weights.iter().zip(&loadings) {
            let coef = pl.dot(&w);
            wstar.axpy(-coef, ws, 1.0);
        }
        let k = components.ncols();
        components = components.insert_column(k, 0.0);
        components.set_column(k, &t);
        weights.push(w);
        x_weights.push(wstar);
        loadings.push(loading);
    }

    let stack = |cols: &[DVector<f64>]| DMatrix::from_columns(cols);
    Ok(PlsGlrModel {
        weights: stack(&weights),
        x_weights: stack(&x_weights),
        loadings: stack(&loadings),
        components,
        column_means,
        family: opts.family,
        sparsify_p_threshold: opts.sparsify_p_threshold,
        undetermined_rows: (0..n).filter(|&i| undetermined[i]).collect(),
    })
}

impl PlsGlrModel {
    pub fn n_components(&self) -> usize {
        self.weights.ncols()
    }

    pub fn n_genes(&self) -> usize {
        self.column_means.len()
    }

    /// Component scores of new samples.
    ///
    /// Complete rows use `(x - means) · x_weights`; rows with missing cells
    /// repeat the training slope rule and deflation over their observed genes.
    pub fn project(&self, x: &ExpressionMatrix) -> Result<DMatrix<f64>> {
        Ok(self.project_with_status(x)?.0)
    }

    /// Like [`project`](Self::project), also flagging rows whose score was undetermined.
    pub fn project_with_status(&self, x: &ExpressionMatrix) -> Result<(DMatrix<f64>, Vec<bool>)> {
        let p = self.n_genes();
        if x.ncols() != p {
            return Err(Error::Shape(format!(
                "model fitted on {p} genes, input has {}",
                x.ncols()
            )));
        }
        let m = self.n_components();
        let mut out = DMatrix::zeros(x.nrows(), m);
        let mut undetermined = vec![false; x.nrows()];
        for i in 0..x.nrows() {
            let complete = (0..p).all(|j| x.is_observed(i, j));
            if complete {
                let r = DVector::from_fn(p, |j, _| x.values()[(i, j)] - self.column_means[j]);
                for h in 0..m {
                    out[(i, h)] = r.dot(&self.x_weights.column(h));
                }
                continue;
            }
            let mut r: Vec<Option<f64>> =
                (0..p).map(|j| x.get(i, j).map(|v| v - self.column_means[j])).collect();
            for h in 0..m {
                let w = self.weights.column(h);
                let (mut num, mut den) = (0.0, 0.0);
                for (j, rj) in r.iter().enumerate() {
                    if let Some(v) = rj {
                        if w[j] != 0.0 {
                            num += v * w[j];
                            den += w[j] * w[j];
                        }
                    }
                }
                let t = if den > 0.0 {
                    num / den
                } else {
                    undetermined[i] = true;
                    0.0
                };
                out[(i, h)] = t;
                for (j, rj) in r.iter_mut().enumerate() {
                    if let Some(v) = rj {
                        *v -= t * self.loadings[(j, h)];
                    }
                }
            }
        }
        Ok((out, undetermined))
    }

    /// The first `m` components only.
    pub fn truncate(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.n_components() {
            return Err(Error::InvalidArgument(format!(
                "cannot keep {m} of {} components",
                self.n_components()
            )));
        }
        let cols = |mat: &DMatrix<f64>| mat.columns(0, m).into_owned();
        Ok(Self {
            weights: cols(&self.weights),
            x_weights: cols(&self.x_weights),
            loadings: cols(&self.loadings),
            components: cols(&self.components),
            column_means: self.column_means.clone(),
            family: self.family,
            sparsify_p_threshold: self.sparsify_p_threshold,
            undetermined_rows: self.undetermined_rows.clone(),
        })
    }
}

fn determined_rows(model: &PlsGlrModel, n: usize) -> Vec<usize> {
    if !model.undetermined_rows.is_empty() {
        log::warn!(
            "{} training rows have undetermined components and are left out of the classifier fit",
            model.undetermined_rows.len()
        );
    }
    (0..n)
        .filter(|i| model.undetermined_rows.binary_search(i).is_err())
        .collect()
}

fn with_intercept(t: &DMatrix<f64>) -> DMatrix<f64> {
    t.clone().insert_column(0, 1.0)
}

/// PLSGLR components followed by logistic regression.
#[derive(Debug, Clone, PartialEq)]
pub struct PlsGlrLog {
    pub model: PlsGlrModel,
    /// Intercept then one coefficient per component.
    pub coefficients: DVector<f64>,
    pub link_converged: bool,
}

impl PlsGlrLog {
    pub fn fit(d: &Dataset, m: usize, opts: &ExtractOptions) -> Result<Self> {
        let opts = ExtractOptions {
            family: Family::Binomial,
            ..*opts
        };
        let y = response_for(d, Family::Binomial)?;
        let model = extract_components(&d.x, &y, m, &opts)?;
        Self::from_model(model, &y, &opts.glm)
    }

    /// Fits the logistic head on an already extracted model.
    pub fn from_model(model: PlsGlrModel, y: &[f64], glm: &GlmOptions) -> Result<Self> {
        let rows = determined_rows(&model, y.len());
        let t = model.components.select_rows(&rows);
        let yr: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
        let fit: GlmFit = fit_glm(&with_intercept(&t), &yr, Family::Binomial, glm)?;
        Ok(Self {
            model,
            coefficients: fit.coefficients,
            link_converged: fit.converged,
        })
    }

    /// Probability of class 1 for each sample.
    pub fn predict_proba(&self, x: &ExpressionMatrix) -> Result<Vec<f64>> {
        let t = self.model.project(x)?;
        let eta = with_intercept(&t) * &self.coefficients;
        Ok(eta.iter().map(|&e| 1.0 / (1.0 + (-e).exp())).collect())
    }

    pub fn predict(&self, x: &ExpressionMatrix) -> Result<Vec<usize>> {
        Ok(self
            .predict_proba(x)?
            .into_iter()
            .map(|p| usize::from(p > 0.5))
            .collect())
    }
}

/// PLSGLR components (binomial weights) followed by LDA.
#[derive(Debug, Clone, PartialEq)]
pub struct PlsGlrDa {
    pub model: PlsGlrModel,
    pub lda: LdaModel,
}

impl PlsGlrDa {
    pub fn fit(d: &Dataset, m: usize, opts: &ExtractOptions, ridge: f64) -> Result<Self> {
        let opts = ExtractOptions {
            family: Family::Binomial,
            ..*opts
        };
        let y = response_for(d, Family::Binomial)?;
        let model = extract_components(&d.x, &y, m, &opts)?;
        Self::from_model(model, d, ridge)
    }

    pub fn from_model(model: PlsGlrModel, d: &Dataset, ridge: f64) -> Result<Self> {
        let rows = determined_rows(&model, d.n_samples());
        let t = model.components.select_rows(&rows);
        let lda = fit_lda(&t, &d.y.select(&rows)?, ridge)?;
        Ok(Self { model, lda })
    }

    pub fn predict(&self, x: &ExpressionMatrix) -> Result<Vec<usize>> {
        let t = self.model.project(x)?;
        Ok(self.lda.predict(&t)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabelVector;

    fn gaussian_opts() -> ExtractOptions {
        ExtractOptions {
            family: Family::Gaussian,
            sparsify_p_threshold: None,
            stop_when_insignificant: false,
            glm: GlmOptions::default(),
        }
    }

    fn matrix(rows: &[&[f64]]) -> ExpressionMatrix {
        let rows: Vec<Vec<Option<f64>>> = rows.iter().map(|r| r.iter().map(|&v| Some(v)).collect()).collect();
        ExpressionMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn single_gene_component_is_the_centered_gene() {
        let x = matrix(&[&[1.0], &[2.0], &[4.0], &[7.0]]);
        let y = [0.0, 1.0, 1.5, 3.0];
        let model = extract_components(&x, &y, 1, &gaussian_opts()).unwrap();
        assert_eq!(model.weights[(0, 0)], 1.0);
        let expected = [-2.5, -1.5, 0.5, 3.5];
        for (i, e) in expected.iter().enumerate() {
            assert!((model.components[(i, 0)] - e).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_slopes_are_an_error() {
        // Constant gene: degenerate slope 0 everywhere.
        let x = matrix(&[&[1.0], &[1.0], &[1.0], &[1.0]]);
        let err = extract_components(&x, &[0.0, 1.0, 0.0, 1.0], 1, &gaussian_opts()).unwrap_err();
        assert!(matches!(err, Error::NoSignal));
    }

    #[test]
    fn projecting_the_mean_gives_zero() {
        let x = matrix(&[&[1.0, 5.0], &[2.0, 3.0], &[4.0, 4.0], &[7.0, 0.0], &[3.0, 2.0]]);
        let y = [0.0, 1.0, 1.5, 3.0, 0.5];
        let model = extract_components(&x, &y, 2, &gaussian_opts()).unwrap();
        let mean_row = ExpressionMatrix::from_rows(&[model.column_means.iter().map(|&v| Some(v)).collect()]).unwrap();
        assert!(model.project(&mean_row).unwrap().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn separation_clip_caps_unconverged() {
        let mut a = vec![1.0, -2.0, 50.0, -80.0, 0.5];
        let s = [
            SlopeStatus::Converged,
            SlopeStatus::Converged,
            SlopeStatus::NotConverged,
            SlopeStatus::NotConverged,
            SlopeStatus::Degenerate,
        ];
        clip_unconverged(&mut a, &s);
        let cap = 1.0 + 0.99 * 1.0;
        assert_eq!(a, vec![1.0, -2.0, cap, -cap, 0.5]);
    }

    #[test]
    fn rejects_multiclass_binomial() {
        let x = matrix(&[&[1.0], &[2.0], &[3.0]]);
        let d = Dataset::new(x, LabelVector::new(vec![0, 1, 2], 3).unwrap()).unwrap();
        assert!(PlsGlrLog::fit(&d, 1, &ExtractOptions::default()).is_err());
    }

    fn random_binary(n: usize, p: usize, seed: u64) -> Dataset {
        use rand::{Rng, SeedableRng};
        use rand_distr::StandardNormal;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let x = DMatrix::from_fn(n, p, |i, j| {
            let z: f64 = rng.sample(StandardNormal);
            z + if j < 5 { labels[i] as f64 * 1.5 } else { 0.0 }
        });
        Dataset::new(
            ExpressionMatrix::from_matrix(x).unwrap(),
            LabelVector::new(labels, 2).unwrap(),
        )
        .unwrap()
    }

    fn binomial_full() -> ExtractOptions {
        ExtractOptions {
            sparsify_p_threshold: None,
            stop_when_insignificant: false,
            ..ExtractOptions::default()
        }
    }

    #[test]
    fn binomial_components_orthogonal_and_self_consistent() {
        let d = random_binary(30, 50, 3);
        let y = response_for(&d, Family::Binomial).unwrap();
        let m = extract_components(&d.x, &y, 3, &binomial_full()).unwrap();
        assert_eq!(m.n_components(), 3);
        let t = &m.components;
        for h in 0..3 {
            assert!((m.weights.column(h).norm() - 1.0).abs() < 1e-10);
            for k in 0..h {
                let c = t.column(h).dot(&t.column(k)) / (t.column(h).norm() * t.column(k).norm());
                assert!(c.abs() < 1e-8, "components {h},{k}: {c}");
            }
        }
        assert!((m.project(&d.x).unwrap() - t).abs().max() < 1e-8);
    }

    #[test]
    fn deflated_columns_are_orthogonal_to_component() {
        let d = random_binary(20, 8, 5);
        let y = response_for(&d, Family::Binomial).unwrap();
        let m = extract_components(&d.x, &y, 1, &binomial_full()).unwrap();
        let (xc, _) = center_columns(&d.x).unwrap();
        let t = m.components.column(0);
        let resid = xc.values() - t * m.loadings.column(0).transpose();
        for j in 0..8 {
            let col = resid.column(j);
            assert!(col.dot(&t).abs() <= 1e-8 * t.norm() * col.norm().max(1e-300));
        }
    }

    #[test]
    fn scaling_inputs_keeps_log_predictions() {
        let d = random_binary(24, 12, 9);
        let opts = ExtractOptions::default();
        let base = PlsGlrLog::fit(&d, 2, &opts).unwrap();
        let scaled = d.with_x(d.x.map_observed(|v| v * 7.5).unwrap()).unwrap();
        let fit = PlsGlrLog::fit(&scaled, 2, &opts).unwrap();
        assert_eq!(base.predict(&d.x).unwrap(), fit.predict(&scaled.x).unwrap());
    }

    #[test]
    fn single_gene_log_head_matches_univariate_logistic() {
        let x = matrix(&[&[0.3], &[1.1], &[2.0], &[0.8], &[2.9], &[1.7], &[3.3], &[0.1]]);
        let y = LabelVector::new(vec![0, 0, 1, 1, 1, 0, 1, 0], 2).unwrap();
        let d = Dataset::new(x.clone(), y.clone()).unwrap();
        let head = PlsGlrLog::fit(&d, 1, &binomial_full()).unwrap();
        let (xc, _) = center_columns(&x).unwrap();
        let design = xc.values().clone().insert_column(0, 1.0);
        let yf: Vec<f64> = y.labels().iter().map(|&l| l as f64).collect();
        let direct = fit_glm(&design, &yf, Family::Binomial, &GlmOptions::default()).unwrap();
        let eta = design * direct.coefficients;
        let expected: Vec<usize> = eta.iter().map(|&e| usize::from(e > 0.0)).collect();
        assert_eq!(head.predict(&x).unwrap(), expected);
    }

    #[test]
    fn da_head_separates_blobs() {
        let d = random_binary(30, 40, 11);
        let shifted = d
            .with_x(
                ExpressionMatrix::from_matrix(DMatrix::from_fn(30, 40, |i, j| {
                    d.x.values()[(i, j)] + if j < 5 { 4.0 * d.y.labels()[i] as f64 } else { 0.0 }
                }))
                .unwrap(),
            )
            .unwrap();
        let da = PlsGlrDa::fit(&shifted, 2, &ExtractOptions::default(), 0.0).unwrap();
        assert_eq!(da.lda.dimension(), da.model.n_components());
        assert_eq!(da.predict(&shifted.x).unwrap(), shifted.y.labels());
    }

    #[test]
    fn truncation_keeps_leading_columns() {
        let d = random_binary(30, 20, 13);
        let y = response_for(&d, Family::Binomial).unwrap();
        let m = extract_components(&d.x, &y, 3, &binomial_full()).unwrap();
        let two = extract_components(&d.x, &y, 2, &binomial_full()).unwrap();
        let cut = m.truncate(2).unwrap();
        assert!((cut.x_weights - two.x_weights).abs().max() < 1e-12);
        assert!(m.truncate(4).is_err());
    }

    #[test]
    fn missing_row_projection_is_finite() {
        let mut x = matrix(&[&[1.0, 5.0], &[2.0, 3.0], &[4.0, 4.0], &[7.0, 0.0], &[3.0, 2.0]]);
        x.mask_cell(2, 1);
        let y = [0.0, 1.0, 1.5, 3.0, 0.5];
        let model = extract_components(&x, &y, 2, &gaussian_opts()).unwrap();
        let t = model.project(&x).unwrap();
        assert!(t.iter().all(|v| v.is_finite()));
        assert!((t - &model.components).abs().max() < 1e-10);
    }
}
