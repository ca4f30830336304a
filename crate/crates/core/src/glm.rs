//! Generalized linear models fitted by iteratively reweighted least squares,
//! with Wald significance statistics.
//!
//! Two families are supported: binomial with the logit link and Gaussian
//! with the identity link. Binomial fits use step halving so the
//! log-likelihood never decreases between iterations.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::ExpressionMatrix;
use crate::error::{Error, Result};
use crate::stats::two_sided_normal_p;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Binary response in {0, 1}, logit link.
    Binomial,
    /// Continuous response, identity link.
    Gaussian,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Binomial => "binomial",
            Family::Gaussian => "gaussian",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binomial" => Ok(Family::Binomial),
            "gaussian" => Ok(Family::Gaussian),
            _ => Err(Error::InvalidArgument(format!("unknown family {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlmOptions {
    pub max_iter: usize,
    /// Convergence threshold on the Euclidean norm of the score vector.
    pub tol: f64,
}

impl Default for GlmOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-8,
        }
    }
}

/// Fitted probabilities closer than this to 0 or 1 signal separation.
const SEPARATION_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    /// Intercept first when the design carries one.
    pub coefficients: DVector<f64>,
    pub standard_errors: DVector<f64>,
    pub wald_p_values: DVector<f64>,
    pub converged: bool,
    /// Binomial fit stopped because fitted probabilities reached 0 or 1.
    pub separated: bool,
    pub family: Family,
    pub iterations: usize,
    /// Binomial log-likelihood after each iteration, starting from the null fit.
    pub log_likelihood_trace: Vec<f64>,
}

impl GlmFit {
    /// Linear predictor for each row of `design`.
    pub fn linear_predictor(&self, design: &DMatrix<f64>) -> DVector<f64> {
        design * &self.coefficients
    }
}

/// Columns that are linear combinations of earlier columns.
pub fn dependent_columns(design: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for (j, col) in design.column_iter().enumerate() {
        let norm = col.norm();
        let mut r = col.clone_owned();
        // Two passes of modified Gram-Schmidt for stability.
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&r);
                r.axpy(-proj, q, 1.0);
            }
        }
        let rn = r.norm();
        if norm == 0.0 || rn <= 1e-9 * norm {
            dependent.push(j);
        } else {
            basis.push(r / rn);
        }
    }
    dependent
}

fn log1p_exp(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn binomial_log_likelihood(eta: &DVector<f64>, y: &[f64]) -> f64 {
    eta.iter().zip(y).map(|(&e, &yi)| yi * e - log1p_exp(e)).sum()
}

/// Fits `y` on the columns of `design`. Include an intercept column
/// explicitly if one is wanted.
pub fn fit_glm(design: &DMatrix<f64>, y: &[f64], family: Family, opts: &GlmOptions) -> Result<GlmFit> {
    let (n, q) = design.shape();
    if q == 0 {
        return Err(Error::InvalidArgument("design has no columns".into()));
    }
    if y.len() != n {
        return Err(Error::Shape(format!("design has {n} rows, response has {}", y.len())));
    }
    if design.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("design and response must be finite".into()));
    }
    let dependent = dependent_columns(design);
    if !dependent.is_empty() {
        return Err(Error::RankDeficient { columns: dependent });
    }
    match family {
        Family::Gaussian => fit_gaussian(design, y),
        Family::Binomial => {
            if let Some(bad) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "binomial response must be 0 or 1, got {bad}"
                )));
            }
            fit_binomial(design, y, opts)
        }
    }
}

fn wald(coefficients: &DVector<f64>, se: &DVector<f64>) -> DVector<f64> {
    coefficients.zip_map(se, |b, s| {
        if s.is_finite() && s > 0.0 {
            two_sided_normal_p(b / s)
        } else {
            1.0
        }
    })
}

fn fit_gaussian(design: &DMatrix<f64>, y: &[f64]) -> Result<GlmFit> {
    let (n, q) = design.shape();
    if n <= q {
        return Err(Error::InvalidArgument(format!(
            "gaussian fit needs more rows ({n}) than columns ({q})"
        )));
    }
    let yv = DVector::from_column_slice(y);
    let qr = design.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numerical("singular R factor in least squares".into()))?;
    let resid = &yv - design * &beta;
    let sigma2 = resid.norm_squared() / (n - q) as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(q, q))
        .ok_or_else(|| Error::Numerical("singular R factor in least squares".into()))?;
    let se = DVector::from_fn(q, |i, _| (sigma2 * r_inv.row(i).norm_squared()).sqrt());
    Ok(GlmFit {
        wald_p_values: wald(&beta, &se),
        coefficients: beta,
        standard_errors: se,
        converged: true,
        separated: false,
        family: Family::Gaussian,
        iterations: 1,
        log_likelihood_trace: Vec::new(),
    })
}

fn fit_binomial(design: &DMatrix<f64>, y: &[f64], opts: &GlmOptions) -> Result<GlmFit> {
    let q = design.ncols();
    let yv = DVector::from_column_slice(y);
    let mut beta = DVector::zeros(q);
    let mut eta = design * &beta;
    let mut ll = binomial_log_likelihood(&eta, y);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut separated = false;
    let mut iterations = 0;

    loop {
        let mu = eta.map(logistic);
        if mu.iter().any(|&m| !(SEPARATION_EPS..=1.0 - SEPARATION_EPS).contains(&m)) {
            separated = true;
            break;
        }
        let score = design.tr_mul(&(&yv - &mu));
        if score.norm() <= opts.tol {
            converged = true;
            break;
        }
        if iterations == opts.max_iter {
            break;
        }
        iterations += 1;

        let w = mu.map(|m| m * (1.0 - m));
        let info = weighted_cross_product(design, &w);
        let Some(chol) = info.cholesky() else {
            separated = true;
            break;
        };
        let mut step = chol.solve(&score);
        let mut candidate = &beta + &step;
        let mut cand_eta = design * &candidate;
        let mut cand_ll = binomial_log_likelihood(&cand_eta, y);
        let mut halvings = 0;
        while cand_ll < ll && halvings < 40 {
            step *= 0.5;
            candidate = &beta + &step;
            cand_eta = design * &candidate;
            cand_ll = binomial_log_likelihood(&cand_eta, y);
            halvings += 1;
        }
        if cand_ll < ll {
            // No ascent direction left at machine precision.
            converged = score.norm() <= opts.tol.sqrt();
            break;
        }
        beta = candidate;
        eta = cand_eta;
        ll = cand_ll;
        trace.push(ll);
    }

    let mu = eta.map(logistic);
    let w = mu.map(|m| m * (1.0 - m));
    let se = weighted_cross_product(design, &w)
        .try_inverse()
        .map(|inv| DVector::from_fn(q, |i, _| inv[(i, i)].max(0.0).sqrt()))
        .unwrap_or_else(|| DVector::from_element(q, f64::INFINITY));
    Ok(GlmFit {
        wald_p_values: wald(&beta, &se),
        coefficients: beta,
        standard_errors: se,
        converged: converged && !separated,
        separated,
        family: Family::Binomial,
        iterations,
        log_likelihood_trace: trace,
    })
}

fn weighted_cross_product(design: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = design.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= w[i];
    }
    design.tr_mul(&scaled)
}

/// Outcome of one gene's fit in a batch sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlopeStatus {
    Converged,
    /// Binomial fit did not converge (typically separation).
    NotConverged,
    /// Too few observed rows or a constant/collinear gene; slope 0, p 1.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneSlope {
    pub slope: f64,
    pub p_value: f64,
    pub status: SlopeStatus,
}

impl GeneSlope {
    const DEGENERATE: GeneSlope = GeneSlope {
        slope: 0.0,
        p_value: 1.0,
        status: SlopeStatus::Degenerate,
    };
}

/// For every gene `j`, fits `y ~ 1 + controls + x_j` over the rows where
/// `x_j` is observed and returns the coefficient of `x_j` with its Wald p-value.
pub fn univariate_slope_batch(
    x: &ExpressionMatrix,
    controls: &DMatrix<f64>,
    y: &[f64],
    family: Family,
    opts: &GlmOptions,
) -> Result<Vec<GeneSlope>> {
    let n = x.nrows();
    if controls.nrows() != n || y.len() != n {
        return Err(Error::Shape(format!(
            "{n} samples but {} control rows and {} responses",
            controls.nrows(),
            y.len()
        )));
    }
    if controls.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("controls must be complete and finite".into()));
    }
    let h = controls.ncols();
    let cols = h + 2;
    Ok((0..x.ncols())
        .into_par_iter()
        .map(|j| {
            let rows: Vec<usize> = x.observed_column(j).map(|(i, _)| i).collect();
            if rows.len() < cols + 1 {
                return GeneSlope::DEGENERATE;
            }
            let design = DMatrix::from_fn(rows.len(), cols, |r, c| {
                let i = rows[r];
                match c {
                    0 => 1.0,
                    c if c <= h => controls[(i, c - 1)],
                    _ => x.values()[(i, j)],
                }
            });
            let yj: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            match fit_glm(&design, &yj, family, opts) {
                Ok(fit) => GeneSlope {
                    slope: fit.coefficients[cols - 1],
                    p_value: fit.wald_p_values[cols - 1],
                    status: if fit.converged {
                        SlopeStatus::Converged
                    } else {
                        SlopeStatus::NotConverged
                    },
                },
                Err(_) => GeneSlope::DEGENERATE,
            }
        })
        .collect())
}
