use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::data::LabelVector;
use crate::error::{Error, Result};

/// Relative eigenvalue floor below which the pooled covariance counts as singular.
const SINGULAR_RTOL: f64 = 1e-10;

/// Linear discriminant analysis with a pooled within-class covariance.
///
/// The discriminant of class `k` is `x'Σ⁻¹μ_k − ½μ_k'Σ⁻¹μ_k + log π_k`;
/// only `Σ⁻¹μ_k` and the constant terms are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    /// `C × q` class means.
    pub means: DMatrix<f64>,
    /// `q × C`, column `k` is `Σ⁻¹ μ_k`.
    pub coefficients: DMatrix<f64>,
    /// `−½ μ_k'Σ⁻¹μ_k + log π_k`.
    pub intercepts: Vec<f64>,
    pub log_priors: Vec<f64>,
    pub ridge: f64,
}

impl LdaModel {
    pub fn class_count(&self) -> usize {
        self.means.nrows()
    }

    pub fn dimension(&self) -> usize {
        self.means.ncols()
    }

    /// `n × C` discriminant scores.
    pub fn scores(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.dimension() {
            return Err(Error::Shape(format!(
                "LDA fitted on {} features, input has {}",
                self.dimension(),
                x.ncols()
            )));
        }
        let mut s = x * &self.coefficients;
        for (k, mut col) in s.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.intercepts[k]);
        }
        Ok(s)
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<(Vec<usize>, DMatrix<f64>)> {
        let s = self.scores(x)?;
        let labels = s.row_iter().map(|r| argmax(r.iter().copied())).collect();
        Ok((labels, s))
    }
}

/// Index of the largest value; ties go to the smallest index.
pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Fits LDA on complete data. With `ridge > 0` the pooled covariance is
/// regularized to `Σ + ridge · trace(Σ)/q · I`.
pub fn fit_lda(x: &DMatrix<f64>, y: &LabelVector, ridge: f64) -> Result<LdaModel> {
    let (n, q) = x.shape();
    let c = y.class_count();
    if y.len() != n {
        return Err(Error::CountMismatch {
            samples: n,
            labels: y.len(),
        });
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidArgument(format!("ridge must be >= 0, got {ridge}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::MissingValues("LDA requires complete, finite data".into()));
    }
    let counts = y.class_counts();
    if let Some(k) = counts.iter().position(|&m| m < 2) {
        return Err(Error::InvalidArgument(format!(
            "LDA needs at least 2 samples per class; class {k} has {}",
            counts[k]
        )));
    }

    let mut means = DMatrix::zeros(c, q);
    for (i, &l) in y.labels().iter().enumerate() {
        let mut row = means.row_mut(l);
        row += x.row(i);
    }
    for (k, &count) in counts.iter().enumerate() {
        let mut row = means.row_mut(k);
        row /= count as f64;
    }
    // Within-class deviations.
    let z = DMatrix::from_fn(n, q, |i, j| x[(i, j)] - means[(y.labels()[i], j)]);
    let dof = (n - c) as f64;
    let log_priors: Vec<f64> = counts.iter().map(|&m| (m as f64 / n as f64).ln()).collect();

    let trace = z.iter().map(|v| v * v).sum::<f64>() / dof;
    if trace <= 0.0 {
        return Err(Error::SingularCovariance("all features are constant within classes".into()));
    }
    let delta = ridge * trace / q as f64;

    let coefficients = if q <= n {
        let mut sigma = z.tr_mul(&z) / dof;
        for i in 0..q {
            sigma[(i, i)] += delta;
        }
        let eig = SymmetricEigen::new(sigma);
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if min <= SINGULAR_RTOL * max {
            return Err(Error::SingularCovariance(format!(
                "eigenvalue ratio {:.3e} with {q} features and {n} samples",
                min / max
            )));
        }
        let inv_vals = eig.eigenvalues.map(|v| 1.0 / v);
        let v = &eig.eigenvectors;
        let proj = v.tr_mul(&means.transpose());
        let scaled = DMatrix::from_fn(q, c, |i, k| proj[(i, k)] * inv_vals[i]);
        v * scaled
    } else {
        if ridge == 0.0 {
            return Err(Error::SingularCovariance(format!(
                "{q} features exceed {n} samples"
            )));
        }
        // Woodbury: (δI + Z'Z/ν)⁻¹ = (I − Z'(νδI + ZZ')⁻¹Z) / δ
        let mut inner = &z * z.transpose();
        for i in 0..n {
            inner[(i, i)] += dof * delta;
        }
        let chol = inner
            .cholesky()
            .ok_or_else(|| Error::Numerical("ridge LDA inner system not positive definite".into()))?;
        let mt = means.transpose();
        let zm = &z * &mt;
        let correction = z.tr_mul(&chol.solve(&zm));
        (mt - correction) / delta
    };

    let intercepts = (0..c)
        .map(|k| {
            let mu: DVector<f64> = means.row(k).transpose();
            -0.5 * mu.dot(&coefficients.column(k)) + log_priors[k]
        })
        .collect();
    Ok(LdaModel {
        means,
        coefficients,
        intercepts,
        log_priors,
        ridge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(values.len(), 1, values)
    }

    #[test]
    fn one_dimensional_boundary_at_zero() {
        let y = LabelVector::new(vec![0, 0, 1, 1], 2).unwrap();
        let m = fit_lda(&column(&[-2.0, -1.0, 1.0, 2.0]), &y, 0.0).unwrap();
        let (labels, s) = m.predict(&column(&[0.5, -0.5, 0.0])).unwrap();
        assert_eq!(labels[0], 1);
        assert_eq!(labels[1], 0);
        // Exactly on the boundary: tie goes to the smaller label.
        assert!((s[(2, 0)] - s[(2, 1)]).abs() < 1e-12);
        assert_eq!(labels[2], 0);
    }

    #[test]
    fn identical_means_reduce_to_priors() {
        let y = LabelVector::new(vec![0, 0, 0, 1, 1], 2).unwrap();
        let x = column(&[-1.0, 0.0, 1.0, -1.0, 1.0]);
        let m = fit_lda(&x, &y, 0.0).unwrap();
        let (_, s) = m.predict(&column(&[3.0, -7.0])).unwrap();
        for r in 0..2 {
            let diff = s[(r, 0)] - s[(r, 1)];
            assert!((diff - (m.log_priors[0] - m.log_priors[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn wide_data_needs_ridge() {
        let x = DMatrix::from_fn(4, 6, |i, j| ((i * 7 + j * 3) % 5) as f64);
        let y = LabelVector::new(vec![0, 0, 1, 1], 2).unwrap();
        assert!(matches!(fit_lda(&x, &y, 0.0), Err(Error::SingularCovariance(_))));
        assert!(fit_lda(&x, &y, 1e-3).is_ok());
    }

    #[test]
    fn woodbury_matches_direct_inverse() {
        let x = DMatrix::from_fn(5, 7, |i, j| ((i * 13 + j * 5 + i * j) % 11) as f64 / 3.0);
        let y = LabelVector::new(vec![0, 1, 0, 1, 1], 2).unwrap();
        let m = fit_lda(&x, &y, 0.5).unwrap();
        // Direct regularized inverse for comparison.
        let z = DMatrix::from_fn(5, 7, |i, j| x[(i, j)] - m.means[(y.labels()[i], j)]);
        let mut sigma = z.tr_mul(&z) / 3.0;
        let delta = 0.5 * sigma.trace() / 7.0;
        for i in 0..7 {
            sigma[(i, i)] += delta;
        }
        let direct = sigma.try_inverse().unwrap() * m.means.transpose();
        assert!((direct - &m.coefficients).abs().max() < 1e-9);
    }

    #[test]
    fn priors_sum_to_one() {
        let y = LabelVector::new(vec![0, 0, 1, 1, 1, 2, 2], 3).unwrap();
        let x = DMatrix::from_fn(7, 2, |i, j| (i as f64 + 1.0) * (j as f64 + 0.5) + (i % 3) as f64);
        let m = fit_lda(&x, &y, 0.0).unwrap();
        let total: f64 = m.log_priors.iter().map(|l| l.exp()).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }
}
