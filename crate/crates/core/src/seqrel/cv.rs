//! Stratified k-fold cross-validation repeated with fresh shuffles.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{oversample_indices, shuffled, Confusion, EvalMetrics};
use crate::error::{Error, Result};
use crate::pairstats::FeatureMask;

pub trait Predictor {
    fn predict(&self, row: &[f64]) -> bool;
}

/// Something that can be fitted on a training split.
pub trait Learner {
    fn name(&self) -> &str;
    fn fit(&self, x: &[Vec<f64>], y: &[bool], mask: FeatureMask, seed: u64) -> Result<Box<dyn Predictor>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvProtocol {
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Balance classes in every training split.
    pub oversample: bool,
}

impl Default for CvProtocol {
    fn default() -> Self {
        CvProtocol {
            folds: 5,
            repeats: 10,
            seed: 42,
            oversample: true,
        }
    }
}

/// Row ids involved in one fold of one repeat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldRun {
    pub repeat: usize,
    pub fold: usize,
    /// Ids handed to `fit`, oversampling duplicates included.
    pub fit_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
}

/// Fold assignment per row. Rows are shuffled within each class and dealt
/// round-robin, so both fold sizes and per-fold class counts differ by at
/// most one.
pub fn stratified_folds(y: &[bool], folds: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = Vec::with_capacity(y.len());
    for class in [true, false] {
        let members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        order.extend(shuffled(members.len(), rng).into_iter().map(|k| members[k]));
    }
    let mut assignment = alloc::vec![0; y.len()];
    for (slot, &row) in order.iter().enumerate() {
        assignment[row] = slot % folds;
    }
    assignment
}

pub fn cross_validate(learner: &dyn Learner, x: &[Vec<f64>], y: &[bool], mask: FeatureMask, protocol: &CvProtocol) -> Result<EvalMetrics> {
    cross_validate_observed(learner, x, y, mask, protocol, &mut |_| {})
}

/// Cross-validation that reports the row ids of every fold to `observer`.
pub fn cross_validate_observed(
    learner: &dyn Learner,
    x: &[Vec<f64>],
    y: &[bool],
    mask: FeatureMask,
    protocol: &CvProtocol,
    observer: &mut dyn FnMut(&FoldRun),
) -> Result<EvalMetrics> {
    if protocol.folds < 2 || x.len() < protocol.folds {
        return Err(Error::DatasetTooSmall {
            have: x.len(),
            need: protocol.folds.max(2),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(protocol.seed);
    let mut fold_values = Vec::with_capacity(protocol.folds * protocol.repeats);
    for repeat in 0..protocol.repeats {
        let assignment = stratified_folds(y, protocol.folds, &mut rng);
        for fold in 0..protocol.folds {
            let train: Vec<usize> = (0..x.len()).filter(|&i| assignment[i] != fold).collect();
            let test_ids: Vec<usize> = (0..x.len()).filter(|&i| assignment[i] == fold).collect();
            let train_labels: Vec<bool> = train.iter().map(|&i| y[i]).collect();
            let fit_seed = protocol.seed ^ ((repeat * protocol.folds + fold) as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let fit_ids: Vec<usize> = if protocol.oversample {
                oversample_indices(&train_labels, fit_seed)?.into_iter().map(|k| train[k]).collect()
            } else {
                train
            };
            observer(&FoldRun {
                repeat,
                fold,
                fit_ids: fit_ids.clone(),
                test_ids: test_ids.clone(),
            });
            let fx: Vec<Vec<f64>> = fit_ids.iter().map(|&i| x[i].clone()).collect();
            let fy: Vec<bool> = fit_ids.iter().map(|&i| y[i]).collect();
            let model = learner.fit(&fx, &fy, mask, fit_seed)?;
            let pred: Vec<bool> = test_ids.iter().map(|&i| model.predict(&x[i])).collect();
            let gold: Vec<bool> = test_ids.iter().map(|&i| y[i]).collect();
            fold_values.push(Confusion::from_predictions(&pred, &gold).metrics());
        }
    }
    Ok(EvalMetrics::from_folds(fold_values, protocol.repeats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqrel::baselines::ConstantLearner;
    use alloc::vec;

    #[test]
    fn constant_predictor_on_80_20() {
        let x: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
        let y: Vec<bool> = (0..100).map(|i| i < 80).collect();
        let m = cross_validate(&ConstantLearner(true), &x, &y, FeatureMask::ALL, &CvProtocol::default()).unwrap();
        assert_eq!(m.accuracy, 80.0);
        assert_eq!(m.fold_values.len(), 50);
        assert_eq!(m.recall, 100.0);
    }

    #[test]
    fn fold_sizes_within_one() {
        let y: Vec<bool> = (0..23).map(|i| i % 3 == 0).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = stratified_folds(&y, 5, &mut rng);
        let sizes: Vec<usize> = (0..5).map(|f| a.iter().filter(|&&x| x == f).count()).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let pos: Vec<usize> = (0..5).map(|f| (0..23).filter(|&i| a[i] == f && y[i]).count()).collect();
        assert!(pos.iter().max().unwrap() - pos.iter().min().unwrap() <= 1);
    }

    #[test]
    fn too_small_dataset() {
        let x = vec![vec![0.0]; 3];
        let y = vec![true, false, true];
        assert!(matches!(
            cross_validate(&ConstantLearner(true), &x, &y, FeatureMask::ALL, &CvProtocol::default()),
            Err(Error::DatasetTooSmall { .. })
        ));
    }
}
