//! Gene ranking by the ratio of between-group to within-group sums of squares.

use rayon::prelude::*;

use crate::data::{Dataset, ExpressionMatrix, LabelVector};
use crate::error::{Error, Result};

/// Per-gene BSS/WSS ratios and the descending rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneRanking {
    /// `+inf` marks a gene with zero within-group spread but distinct class means.
    pub ratios: Vec<f64>,
    /// Gene indices sorted by descending ratio, ties by ascending index.
    pub order: Vec<usize>,
}

impl GeneRanking {
    /// Rank position (0 = best) of every gene.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.order.len()];
        for (r, &g) in self.order.iter().enumerate() {
            ranks[g] = r;
        }
        ranks
    }
}

fn gene_ratio(x: &ExpressionMatrix, y: &LabelVector, j: usize) -> f64 {
    let c = y.class_count();
    let mut sums = vec![0.0; c];
    let mut counts = vec![0usize; c];
    for (i, v) in x.observed_column(j) {
        let k = y.labels()[i];
        sums[k] += v;
        counts[k] += 1;
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let overall = sums.iter().sum::<f64>() / total as f64;
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
        .collect();
    let bss: f64 = means
        .iter()
        .zip(&counts)
        .map(|(m, &n)| n as f64 * (m - overall).powi(2))
        .sum();
    let wss: f64 = x
        .observed_column(j)
        .map(|(i, v)| (v - means[y.labels()[i]]).powi(2))
        .sum();
    if wss == 0.0 {
        if bss > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        bss / wss
    }
}

/// Ranks every gene of `d` by BSS/WSS. Missing cells are skipped, so each
/// gene's sums run over its observed samples.
pub fn bss_wss_ranking(d: &Dataset) -> GeneRanking {
    let ratios: Vec<f64> = (0..d.n_genes())
        .into_par_iter()
        .map(|j| gene_ratio(&d.x, &d.y, j))
        .collect();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| ratios[b].total_cmp(&ratios[a]).then(a.cmp(&b)));
    GeneRanking { ratios, order }
}

/// Indices of the `p_keep` top-ranked genes in ascending (original) order.
pub fn top_indices(ranking: &GeneRanking, p_keep: usize) -> Result<Vec<usize>> {
    let p = ranking.order.len();
    if p_keep == 0 || p_keep > p {
        return Err(Error::InvalidArgument(format!(
            "p_keep = {p_keep} must be in 1..={p}"
        )));
    }
    let mut kept = ranking.order[..p_keep].to_vec();
    kept.sort_unstable();
    Ok(kept)
}

/// Keeps the `p_keep` best genes, preserving their original column order.
pub fn select_top(d: &Dataset, ranking: &GeneRanking, p_keep: usize) -> Result<(Dataset, Vec<usize>)> {
    if ranking.order.len() != d.n_genes() {
        return Err(Error::Shape(format!(
            "ranking covers {} genes, dataset has {}",
            ranking.order.len(),
            d.n_genes()
        )));
    }
    let kept = top_indices(ranking, p_keep)?;
    Ok((d.select_columns(&kept), kept))
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;

    fn dataset(cols: &[&[f64]], labels: &[usize]) -> Dataset {
        let n = labels.len();
        let x = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
        Dataset::new(
            ExpressionMatrix::from_matrix(x).unwrap(),
            LabelVector::from_labels(labels.to_vec()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn hand_example() {
        let d = dataset(&[&[0.0, 2.0, 4.0, 6.0]], &[0, 0, 1, 1]);
        assert_eq!(bss_wss_ranking(&d).ratios, [4.0]);
    }

    #[test]
    fn degenerate_genes() {
        let d = dataset(
            &[&[0.0, 2.0, 4.0, 6.0], &[5.0, 5.0, 5.0, 5.0], &[1.0, 1.0, 3.0, 3.0]],
            &[0, 0, 1, 1],
        );
        let r = bss_wss_ranking(&d);
        assert_eq!(r.ratios[1], 0.0);
        assert_eq!(r.ratios[2], f64::INFINITY);
        assert_eq!(r.order, [2, 0, 1]);
        assert_eq!(r.ranks(), [1, 2, 0]);

        let (top, idx) = select_top(&d, &r, 2).unwrap();
        assert_eq!(idx, [0, 2]);
        assert_eq!(top.x.get(2, 1), Some(3.0));
    }

    #[test]
    fn select_bounds() {
        let d = dataset(&[&[0.0, 1.0], &[2.0, 0.0]], &[0, 1]);
        let r = bss_wss_ranking(&d);
        assert!(select_top(&d, &r, 0).is_err());
        assert!(select_top(&d, &r, 3).is_err());
        let (all, idx) = select_top(&d, &r, 2).unwrap();
        assert_eq!(idx, [0, 1]);
        assert_eq!(all, d);
    }

    #[test]
    fn ties_go_to_lower_index() {
        let d = dataset(&[&[1.0, 1.0], &[0.0, 0.0], &[1.0, 1.0]], &[0, 1]);
        assert_eq!(bss_wss_ranking(&d).order, [0, 1, 2]);
    }

    #[test]
    fn missing_cells_are_skipped() {
        let x = ExpressionMatrix::from_rows(&[
            vec![Some(0.0)],
            vec![Some(2.0)],
            vec![None],
            vec![Some(4.0)],
            vec![Some(6.0)],
        ])
        .unwrap();
        let d = Dataset::new(x, LabelVector::from_labels(vec![0, 0, 0, 1, 1]).unwrap()).unwrap();
        assert_eq!(bss_wss_ranking(&d).ratios, [4.0]);
    }
}
