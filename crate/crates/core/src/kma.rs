//! Kernel multilogit classifier.
//!
//! Class labels become ε-smoothed probability vectors, which are mapped to
//! `C − 1` log-ratios against the last class. A kernel ridge regression
//! fits those log-ratios; predictions are turned back into probabilities
//! with a softmax that pins the reference class at zero, and the most
//! probable class wins.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::baselines::argmax;
use crate::data::LabelVector;
use crate::error::{Error, Result};
use crate::stats::median;

pub const DEFAULT_EPSILON: f64 = 0.1;
const RESIDUAL_RTOL: f64 = 1e-6;
const JITTER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `⟨a, b⟩ + 1`.
    LinearPlusOne,
    /// `exp(−‖a − b‖² / (2σ²))`.
    Rbf { sigma: f64 },
    /// `(⟨a, b⟩ + offset)^degree`.
    Polynomial { degree: u32, offset: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(Error::InvalidArgument(format!("rbf sigma must be > 0, got {sigma}")))
            }
            KernelSpec::Polynomial { degree: 0, .. } => {
                Err(Error::InvalidArgument("polynomial degree must be >= 1".into()))
            }
            KernelSpec::Polynomial { offset, .. } if !offset.is_finite() => {
                Err(Error::InvalidArgument("polynomial offset must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::LinearPlusOne => dot(a, b) + 1.0,
            KernelSpec::Rbf { sigma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            KernelSpec::Polynomial { degree, offset } => (dot(a, b) + offset).powi(degree as i32),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rows_of(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// `|a| × |b|` kernel matrix.
pub fn gram(a: &DMatrix<f64>, b: &DMatrix<f64>, kernel: &KernelSpec) -> Result<DMatrix<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::Shape(format!(
            "gram inputs have {} and {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    kernel.validate()?;
    let (ra, rb) = (rows_of(a), rows_of(b));
    let rows: Vec<Vec<f64>> = ra
        .par_iter()
        .map(|x| rb.iter().map(|z| kernel.eval(x, z)).collect())
        .collect();
    Ok(DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| rows[i][j]))
}

/// Median of the pairwise Euclidean distances between rows.
pub fn median_pairwise_distance(x: &DMatrix<f64>) -> Result<f64> {
    let rows = rows_of(x);
    let mut d = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            d.push(rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
        }
    }
    match median(d) {
        Some(m) if m > 0.0 => Ok(m),
        _ => Err(Error::InvalidArgument("need at least two distinct rows for the median distance".into())),
    }
}

/// The ε-smoothed probability vector of class `label` among `c`.
pub fn smoothed_target(label: usize, c: usize, epsilon: f64) -> Vec<f64> {
    let off = epsilon / (c - 1) as f64;
    (0..c).map(|k| if k == label { 1.0 - epsilon } else { off }).collect()
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("epsilon must be in (0, 0.5), got {epsilon}")))
    }
}

/// `n × (C−1)` log-ratios `ln(t_j / t_C)` of the smoothed targets.
pub fn encode_targets(y: &LabelVector, epsilon: f64) -> Result<DMatrix<f64>> {
    check_epsilon(epsilon)?;
    Ok(encode_unchecked(y, epsilon))
}

fn encode_unchecked(y: &LabelVector, epsilon: f64) -> DMatrix<f64> {
    let c = y.class_count();
    DMatrix::from_fn(y.len(), c - 1, |i, j| {
        let t = smoothed_target(y.labels()[i], c, epsilon);
        (t[j] / t[c - 1]).ln()
    })
}

/// Softmax over `[ϑ, 0]`, one probability row per input row.
pub fn inverse_logit(theta: &DMatrix<f64>) -> DMatrix<f64> {
    let c = theta.ncols() + 1;
    let mut out = DMatrix::zeros(theta.nrows(), c);
    for i in 0..theta.nrows() {
        let max = theta.row(i).iter().copied().fold(0.0f64, f64::max);
        let mut total = 0.0;
        for j in 0..c {
            let v = if j + 1 < c { theta[(i, j)] } else { 0.0 };
            let e = (v - max).exp();
            out[(i, j)] = e;
            total += e;
        }
        for j in 0..c {
            out[(i, j)] /= total;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmaModel {
    /// `n × (C−1)` dual coefficients.
    pub gamma: DMatrix<f64>,
    pub train_x: DMatrix<f64>,
    pub kernel: KernelSpec,
    pub lambda: f64,
    pub epsilon: f64,
    pub class_count: usize,
}

/// Solves `(K + λI) Γ = ϑ` by Cholesky, retrying once with jitter.
pub fn solve_regularized(k: &DMatrix<f64>, lambda: f64, theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = k.nrows();
    let mut a = k.clone();
    for i in 0..n {
        a[(i, i)] += lambda;
    }
    let chol = match a.clone().cholesky() {
        Some(c) => c,
        None => {
            let jitter = JITTER * k.trace().abs().max(f64::MIN_POSITIVE) / n as f64;
            log::warn!("kernel system not positive definite, adding jitter {jitter:.3e}");
            for i in 0..n {
                a[(i, i)] += jitter;
            }
            a.clone()
                .cholesky()
                .ok_or_else(|| Error::Numerical("kernel system is not positive definite".into()))?
        }
    };
    let gamma = chol.solve(theta);
    if gamma.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite kernel solution".into()));
    }
    let resid = (&a * &gamma - theta).norm();
    if resid > RESIDUAL_RTOL * theta.norm().max(1.0) {
        return Err(Error::Numerical(format!("kernel solve residual {resid:.3e} too large")));
    }
    Ok(gamma)
}

/// Fits the classifier on complete training data.
pub fn fit_kma(x: &DMatrix<f64>, y: &LabelVector, kernel: KernelSpec, lambda: f64, epsilon: f64) -> Result<KmaModel> {
    let k = train_gram(x, y, &kernel, lambda, epsilon)?;
    fit_with_gram(x, y, &k, kernel, lambda, epsilon)
}

fn train_gram(x: &DMatrix<f64>, y: &LabelVector, kernel: &KernelSpec, lambda: f64, epsilon: f64) -> Result<DMatrix<f64>> {
    if x.nrows() != y.len() {
        return Err(Error::CountMismatch {
            samples: x.nrows(),
            labels: y.len(),
        });
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be > 0, got {lambda}")));
    }
    check_epsilon(epsilon)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::MissingValues("KMA requires complete data".into()));
    }
    gram(x, x, kernel)
}

/// Fits with a precomputed training Gram matrix, so grids over `λ` reuse it.
pub fn fit_with_gram(
    x: &DMatrix<f64>,
    y: &LabelVector,
    k: &DMatrix<f64>,
    kernel: KernelSpec,
    lambda: f64,
    epsilon: f64,
) -> Result<KmaModel> {
    if k.shape() != (x.nrows(), x.nrows()) {
        return Err(Error::Shape("gram matrix does not match training rows".into()));
    }
    check_epsilon(epsilon)?;
    let theta = encode_unchecked(y, epsilon);
    let gamma = solve_regularized(k, lambda, &theta)?;
    Ok(KmaModel {
        gamma,
        train_x: x.clone(),
        kernel,
        lambda,
        epsilon,
        class_count: y.class_count(),
    })
}

impl KmaModel {
    /// Fitted log-ratios for new rows.
    pub fn decision(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::MissingValues("KMA requires complete data".into()));
        }
        Ok(gram(x, &self.train_x, &self.kernel)? * &self.gamma)
    }

    /// Labels and `n × C` class probabilities.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<(Vec<usize>, DMatrix<f64>)> {
        let probs = inverse_logit(&self.decision(x)?);
        Ok((classify(&probs), probs))
    }
}

/// Row-wise argmax, ties to the smallest label.
pub fn classify(probs: &DMatrix<f64>) -> Vec<usize> {
    probs.row_iter().map(|r| argmax(r.iter().copied())).collect()
}

/// Dual coefficients for several `λ` sharing one eigendecomposition of `K`.
pub fn fitted_theta_path(k: &DMatrix<f64>, theta: &DMatrix<f64>, lambdas: &[f64]) -> Vec<DMatrix<f64>> {
    let eig = k.clone().symmetric_eigen();
    let proj = eig.eigenvectors.tr_mul(theta);
    lambdas
        .iter()
        .map(|&l| {
            let shrink = DVector::from_iterator(
                eig.eigenvalues.len(),
                eig.eigenvalues.iter().map(|&e| {
                    let e = e.max(0.0);
                    e / (e + l)
                }),
            );
            let scaled = DMatrix::from_fn(proj.nrows(), proj.ncols(), |i, j| proj[(i, j)] * shrink[i]);
            &eig.eigenvectors * scaled
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encodes_log_nine() {
        let y = LabelVector::new(vec![0, 1], 2).unwrap();
        let t = encode_targets(&y, 0.1).unwrap();
        assert!((t[(0, 0)] - 2.197_224_577_336_219_6).abs() < 1e-12);
        assert!((t[(1, 0)] + 2.197_224_577_336_219_6).abs() < 1e-12);
    }

    #[test]
    fn reference_rows_are_constant() {
        let y = LabelVector::new(vec![0, 1, 2], 3).unwrap();
        let eps = 0.2;
        let t = encode_targets(&y, eps).unwrap();
        let expected = (eps / 2.0f64).ln() - (1.0 - eps).ln();
        assert!(t.row(2).iter().all(|v| (v - expected).abs() < 1e-12));
    }

    #[test]
    fn epsilon_range() {
        let y = LabelVector::new(vec![0, 1], 2).unwrap();
        assert!(encode_targets(&y, 0.5).is_err());
        assert!(encode_targets(&y, 0.0).is_err());
    }

    #[test]
    fn uniform_at_zero() {
        let p = inverse_logit(&DMatrix::zeros(1, 3));
        assert!(p.iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn inverse_of_log_nine() {
        let p = inverse_logit(&DMatrix::from_element(1, 1, 9.0f64.ln()));
        assert!((p[(0, 0)] - 0.9).abs() < 1e-12 && (p[(0, 1)] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn linear_gram_of_basis() {
        let e = DMatrix::<f64>::identity(2, 2);
        let k = gram(&e, &e, &KernelSpec::LinearPlusOne).unwrap();
        assert_eq!(k, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
    }

    #[test]
    fn rbf_diagonal_and_wide_limit() {
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 2.0, -3.0, 0.5]);
        let k = gram(&x, &x, &KernelSpec::Rbf { sigma: 0.7 }).unwrap();
        assert!((0..3).all(|i| k[(i, i)] == 1.0));
        let wide = gram(&x, &x, &KernelSpec::Rbf { sigma: 1e6 * 5.0 }).unwrap();
        assert!(wide.iter().all(|&v| v > 0.999));
    }

    #[test]
    fn identity_gram_halves_targets() {
        let theta = DMatrix::from_row_slice(2, 1, &[1.5, -0.4]);
        let g = solve_regularized(&DMatrix::identity(2, 2), 1.0, &theta).unwrap();
        assert!((g - theta / 2.0).abs().max() < 1e-15);
    }

    #[test]
    fn tiny_lambda_interpolates() {
        let x = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let y = LabelVector::new(vec![0, 1, 1, 0], 2).unwrap();
        let m = fit_kma(&x, &y, KernelSpec::Rbf { sigma: 0.5 }, 1e-10, 0.1).unwrap();
        let theta = encode_targets(&y, 0.1).unwrap();
        assert!((m.decision(&x).unwrap() - theta).abs().max() < 1e-4);
        assert_eq!(m.predict(&x).unwrap().0, y.labels());
    }

    #[test]
    fn fitted_norm_shrinks_with_lambda() {
        let x = DMatrix::from_fn(8, 3, |i, j| ((i * 5 + j * 7) % 9) as f64 / 4.0 - 1.0);
        let y = LabelVector::new(vec![0, 1, 2, 0, 1, 2, 0, 1], 3).unwrap();
        let k = gram(&x, &x, &KernelSpec::Rbf { sigma: 1.0 }).unwrap();
        let theta = encode_targets(&y, 0.1).unwrap();
        let lambdas = [1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0];
        let norms: Vec<f64> = lambdas
            .iter()
            .map(|&l| (&k * solve_regularized(&k, l, &theta).unwrap()).norm())
            .collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let path = fitted_theta_path(&k, &theta, &lambdas);
        for (p, n) in path.iter().zip(&norms) {
            assert!((p.norm() - n).abs() < 1e-8);
        }
    }

    #[test]
    fn median_distance() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 3.0]);
        assert_eq!(median_pairwise_distance(&x).unwrap(), 2.0);
    }
}
