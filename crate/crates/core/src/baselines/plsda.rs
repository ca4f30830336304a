use nalgebra::{DMatrix, DVector};

use super::lda::{fit_lda, LdaModel};
use crate::data::LabelVector;
use crate::error::{Error, Result};

const NIPALS_MAX_ITER: usize = 500;
const NIPALS_TOL: f64 = 1e-12;

/// Classical two-block NIPALS PLS of the one-hot class matrix on `X`,
/// followed by LDA on the component scores.
#[derive(Debug, Clone, PartialEq)]
pub struct PlsDaModel {
    pub column_means: Vec<f64>,
    /// `p × m` unit weight vectors on the deflated blocks.
    pub weights: DMatrix<f64>,
    /// `p × m`, scores are `(x - means) · x_weights`.
    pub x_weights: DMatrix<f64>,
    /// `p × m` X loadings used for deflation.
    pub loadings: DMatrix<f64>,
    /// `C × m` loadings of the dummy response.
    pub y_loadings: DMatrix<f64>,
    /// `n × m` training scores.
    pub components: DMatrix<f64>,
    pub lda: LdaModel,
}

/// One-hot coding, one column per class.
pub fn dummy_code(y: &LabelVector) -> DMatrix<f64> {
    DMatrix::from_fn(y.len(), y.class_count(), |i, k| f64::from(u8::from(y.labels()[i] == k)))
}

fn centered(x: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let means: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
    let c = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - means[j]);
    (c, means)
}

pub(crate) struct PlsComponents {
    pub column_means: Vec<f64>,
    pub weights: DMatrix<f64>,
    pub x_weights: DMatrix<f64>,
    pub loadings: DMatrix<f64>,
    pub y_loadings: DMatrix<f64>,
    pub components: DMatrix<f64>,
}

/// NIPALS PLS2 of `response` on `x`, both centered internally.
pub(crate) fn nipals(x: &DMatrix<f64>, response: &DMatrix<f64>, m: usize) -> Result<PlsComponents> {
    let (n, p) = x.shape();
    if m == 0 {
        return Err(Error::InvalidArgument("PLS needs at least one component".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::MissingValues("PLS-DA requires complete data".into()));
    }
    let (mut xr, column_means) = centered(x);
    let (mut yr, _) = centered(response);
    let scale = xr.norm();
    let c = yr.ncols();

    let mut weights = DMatrix::zeros(p, m);
    let mut x_weights = DMatrix::zeros(p, m);
    let mut loadings = DMatrix::zeros(p, m);
    let mut y_loadings = DMatrix::zeros(c, m);
    let mut components = DMatrix::zeros(n, m);

    for h in 0..m {
        let start = (0..c)
            .max_by(|&a, &b| {
                yr.column(a)
                    .norm()
                    .total_cmp(&yr.column(b).norm())
                    .then(b.cmp(&a))
            })
            .unwrap_or(0);
        let mut u: DVector<f64> = yr.column(start).into_owned();
        let mut w = DVector::zeros(p);
        let mut t = DVector::zeros(n);
        for iter in 0..NIPALS_MAX_ITER {
            w = xr.tr_mul(&u);
            let wn = w.norm();
            if wn <= 1e-12 * scale.max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "only {h} PLS components are available, {m} requested"
                )));
            }
            w /= wn;
            let t_new = &xr * &w;
            let tt = t_new.norm_squared();
            let cv = yr.tr_mul(&t_new) / tt;
            let cc = cv.norm_squared();
            let converged = iter > 0 && (&t_new - &t).norm() <= NIPALS_TOL * t_new.norm();
            t = t_new;
            if converged || cc == 0.0 {
                break;
            }
            u = &yr * &cv / cc;
        }
        let lead = w.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if lead < 0.0 {
            w.neg_mut();
            t.neg_mut();
        }
        let tt = t.norm_squared();
        let pl = xr.tr_mul(&t) / tt;
        let cl = yr.tr_mul(&t) / tt;
        let mut wstar = w.clone();
        for k in 0..h {
            let coef = loadings.column(k).dot(&w);
            wstar.axpy(-coef, &x_weights.column(k), 1.0);
        }
        xr -= &t * pl.transpose();
        yr -= &t * cl.transpose();
        weights.set_column(h, &w);
        x_weights.set_column(h, &wstar);
        loadings.set_column(h, &pl);
        y_loadings.set_column(h, &cl);
        components.set_column(h, &t);
    }
    Ok(PlsComponents {
        column_means,
        weights,
        x_weights,
        loadings,
        y_loadings,
        components,
    })
}

impl PlsDaModel {
    pub fn n_components(&self) -> usize {
        self.weights.ncols()
    }

    pub fn project(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.column_means.len() {
            return Err(Error::Shape(format!(
                "PLS-DA fitted on {} genes, input has {}",
                self.column_means.len(),
                x.ncols()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::MissingValues("PLS-DA requires complete data".into()));
        }
        let xc = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - self.column_means[j]);
        Ok(xc * &self.x_weights)
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        Ok(self.lda.predict(&self.project(x)?)?.0)
    }

    /// The model restricted to its first `m` components, with LDA refitted.
    pub fn truncate(&self, m: usize, y: &LabelVector, ridge: f64) -> Result<Self> {
        if m == 0 || m > self.n_components() {
            return Err(Error::InvalidArgument(format!(
                "cannot keep {m} of {} components",
                self.n_components()
            )));
        }
        let cols = |mat: &DMatrix<f64>| mat.columns(0, m).into_owned();
        let components = cols(&self.components);
        Ok(Self {
            column_means: self.column_means.clone(),
            weights: cols(&self.weights),
            x_weights: cols(&self.x_weights),
            loadings: cols(&self.loadings),
            y_loadings: cols(&self.y_loadings),
            lda: fit_lda(&components, y, ridge)?,
            components,
        })
    }
}

/// Dummy-codes `y`, extracts `m` PLS components and fits LDA on them.
pub fn fit_plsda(x: &DMatrix<f64>, y: &LabelVector, m: usize, ridge: f64) -> Result<PlsDaModel> {
    if x.nrows() != y.len() {
        return Err(Error::CountMismatch {
            samples: x.nrows(),
            labels: y.len(),
        });
    }
    let pls = nipals(x, &dummy_code(y), m)?;
    let lda = fit_lda(&pls.components, y, ridge)?;
    Ok(PlsDaModel {
        column_means: pls.column_means,
        weights: pls.weights,
        x_weights: pls.x_weights,
        loadings: pls.loadings,
        y_loadings: pls.y_loadings,
        components: pls.components,
        lda,
    })
}
