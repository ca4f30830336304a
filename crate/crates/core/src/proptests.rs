use nalgebra::DMatrix;
use proptest::prelude::*;

use crate::baselines::fit_lda;
use crate::data::{Dataset, ExpressionMatrix, LabelVector};
use crate::harness::{error_rate, format_rate, stratified_kfold};
use crate::io::{format_matrix, parse_matrix};
use crate::kma::{gram, inverse_logit, KernelSpec};
use crate::plsglr::{extract_components, ExtractOptions};
use crate::preprocess::{standardize_samples, threshold_clip, PreprocessConfig};
use crate::select::bss_wss_ranking;

fn matrix(n: usize, p: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-10.0f64..10.0, n * p).prop_map(move |v| DMatrix::from_row_slice(n, p, &v))
}

fn balanced(n: usize, c: usize) -> LabelVector {
    LabelVector::new((0..n).map(|i| i % c).collect(), c).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn probabilities_are_a_distribution(theta in matrix(4, 3)) {
        let p = inverse_logit(&theta);
        for r in p.row_iter() {
            prop_assert!(r.iter().all(|&v| v > 0.0 && v < 1.0));
            prop_assert!((r.sum() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn rbf_gram_is_symmetric_psd(x in matrix(7, 3), sigma in 0.1f64..10.0) {
        let k = gram(&x, &x, &KernelSpec::Rbf { sigma }).unwrap();
        prop_assert!((&k - k.transpose()).abs().max() <= 1e-12);
        let min = k.clone().symmetric_eigen().eigenvalues.min();
        prop_assert!(min >= -1e-8 * k.trace());
    }

    #[test]
    fn gene_ratio_ignores_affine_rescaling(x in matrix(9, 2), a in 0.5f64..4.0, b in -5.0f64..5.0) {
        let y = balanced(9, 3);
        let d = Dataset::new(ExpressionMatrix::from_matrix(x.clone()).unwrap(), y.clone()).unwrap();
        let moved = Dataset::new(ExpressionMatrix::from_matrix(x.map(|v| a * v + b)).unwrap(), y).unwrap();
        let (r1, r2) = (bss_wss_ranking(&d).ratios, bss_wss_ranking(&moved).ratios);
        for (u, v) in r1.iter().zip(&r2) {
            prop_assert!(*u >= 0.0);
            prop_assert!((u - v).abs() <= 1e-8 * u.max(1.0));
        }
    }

    #[test]
    fn folds_are_stratified(counts in proptest::collection::vec(5usize..15, 2..4), k in 2usize..6, seed in any::<u64>()) {
        let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat(c).take(n)).collect();
        let y = LabelVector::new(labels, counts.len()).unwrap();
        let f = stratified_kfold(&y, k, seed).unwrap();
        prop_assert_eq!(&f, &stratified_kfold(&y, k, seed).unwrap());
        prop_assert_eq!(f.fold_sizes().iter().sum::<usize>(), y.len());
        for c in 0..counts.len() {
            let mut per = vec![0usize; k];
            for (i, &l) in y.labels().iter().enumerate() {
                if l == c {
                    per[f.fold_of[i]] += 1;
                }
            }
            prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn plsglr_components_orthogonal(x in matrix(16, 12)) {
        let y: Vec<f64> = (0..16).map(|i| (i % 2) as f64).collect();
        let opts = ExtractOptions { sparsify_p_threshold: None, stop_when_insignificant: false, ..ExtractOptions::default() };
        let em = ExpressionMatrix::from_matrix(x).unwrap();
        if let Ok(m) = extract_components(&em, &y, 2, &opts) {
            let t = &m.components;
            let (a, b) = (t.column(0), t.column(1));
            if a.norm() > 1e-8 && b.norm() > 1e-8 {
                prop_assert!((a.dot(&b) / (a.norm() * b.norm())).abs() <= 1e-8);
            }
            prop_assert!((m.project(&em).unwrap() - t).abs().max() <= 1e-8 * t.abs().max().max(1.0));
        }
    }

    #[test]
    fn lda_priors_sum_to_one(x in matrix(12, 2)) {
        if let Ok(m) = fit_lda(&x, &balanced(12, 3), 0.0) {
            prop_assert!((m.log_priors.iter().map(|l| l.exp()).sum::<f64>() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn clipping_stays_in_bounds(x in matrix(4, 4)) {
        let cfg = PreprocessConfig { floor: 0.5, ceil: 5.0, ..PreprocessConfig::default() };
        let out = threshold_clip(&ExpressionMatrix::from_matrix(x).unwrap(), &cfg).unwrap();
        prop_assert!(out.values().iter().all(|&v| v >= cfg.floor && v <= cfg.ceil));
    }

    #[test]
    fn standardized_rows_have_unit_spread(x in matrix(3, 6)) {
        prop_assume!(x.row_iter().all(|r| r.iter().any(|&v| (v - r[0]).abs() > 1e-3)));
        let s = standardize_samples(&ExpressionMatrix::from_matrix(x).unwrap()).unwrap();
        for r in s.values().row_iter() {
            let mean = r.mean();
            let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 5.0;
            prop_assert!(mean.abs() <= 1e-10 && (var - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn matrix_text_round_trip(x in matrix(3, 4), hole in 0usize..12) {
        let mut em = ExpressionMatrix::from_matrix(x).unwrap();
        em.mask_cell(hole / 4, hole % 4);
        let back = parse_matrix(&format_matrix(&em, ',', "NA"), ',', "NA").unwrap();
        prop_assert_eq!(back.mask(), em.mask());
        for i in 0..3 {
            for j in 0..4 {
                prop_assert_eq!(back.get(i, j), em.get(i, j));
            }
        }
    }

    #[test]
    fn rates_count_mismatches(pairs in proptest::collection::vec((0usize..3, 0usize..3), 1..40)) {
        let (p, t): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let wrong = pairs.iter().filter(|(a, b)| a != b).count();
        let rate = error_rate(&p, &t).unwrap();
        prop_assert_eq!(rate, 100.0 * wrong as f64 / pairs.len() as f64);
        let shown: f64 = format_rate(rate).parse().unwrap();
        prop_assert!((shown - rate).abs() <= 0.05 + 1e-9);
    }
}
