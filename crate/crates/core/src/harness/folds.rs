use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::LabelVector;
use crate::error::{Error, Result};

/// Fold index of every sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified assignment: every class needs at least `k` members.
pub fn stratified_kfold(y: &LabelVector, k: usize, seed: u64) -> Result<FoldAssignment> {
    let smallest = y.class_counts().into_iter().min().unwrap_or(0);
    if k >= 2 && smallest < k {
        return Err(Error::InvalidArgument(format!(
            "{k} folds need at least {k} samples per class; the smallest class has {smallest}"
        )));
    }
    assign(y, k, seed)
}

/// Like [`stratified_kfold`] but only requires `n ≥ k`; small classes then
/// miss some folds.
pub fn stratified_kfold_relaxed(y: &LabelVector, k: usize, seed: u64) -> Result<FoldAssignment> {
    if y.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{k} folds need at least {k} samples, got {}",
            y.len()
        )));
    }
    assign(y, k, seed)
}

/// Members of each class are shuffled, then dealt round-robin with one
/// counter running across classes, so per-class fold counts differ by at
/// most one and fold sizes stay balanced.
fn assign(y: &LabelVector, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; y.len()];
    let mut counter = 0;
    for c in 0..y.class_count() {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y.labels()[i] == c).collect();
        members.shuffle(&mut rng);
        for i in members {
            fold_of[i] = counter % k;
            counter += 1;
        }
    }
    Ok(FoldAssignment { fold_of, k, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_of_each_class_per_fold() {
        let y = LabelVector::new(vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1], 2).unwrap();
        let f = stratified_kfold(&y, 5, 3).unwrap();
        for fold in 0..5 {
            let test = f.test_indices(fold);
            assert_eq!(test.len(), 2);
            assert_ne!(y.labels()[test[0]], y.labels()[test[1]]);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let y = LabelVector::new((0..40).map(|i| i % 3).collect(), 3).unwrap();
        assert_eq!(stratified_kfold(&y, 4, 9).unwrap(), stratified_kfold(&y, 4, 9).unwrap());
        assert_ne!(stratified_kfold(&y, 4, 9).unwrap(), stratified_kfold(&y, 4, 10).unwrap());
    }

    #[test]
    fn too_many_folds() {
        let y = LabelVector::new(vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1], 2).unwrap();
        assert!(stratified_kfold(&y, 6, 0).is_err());
        let relaxed = stratified_kfold_relaxed(&y, 6, 0).unwrap();
        assert!(relaxed.fold_sizes().iter().all(|&s| s > 0));
    }
}
