//! Sequential relation and direction recognition.
//!
//! Both tasks are binary classification over pair features. This module
//! holds the labeled data model, metrics and oversampling; classifiers,
//! cross-validation, baselines and the feature-group search live in the
//! submodules.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::events::EventKey;
use crate::pairstats::{FeatureMask, FeatureVector};

pub mod baselines;
pub mod classifiers;
pub mod cv;
pub mod search;

pub use baselines::{fit_pmi_threshold, pmi_threshold_baseline, preceding_assumption_baseline, ConstantLearner, PmiThresholdLearner};
pub use classifiers::{train_classifier, ClassifierKind, ClassifierModel, ClassifierSpec, Hyperparams};
pub use cv::{cross_validate, cross_validate_observed, stratified_folds, CvProtocol, FoldRun, Learner, Predictor};
pub use search::{feature_group_search, SearchResult, SearchRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelationLabel {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Relation,
    Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub pair: (EventKey, EventKey),
    pub features: FeatureVector,
    pub relation: RelationLabel,
    pub direction: Option<Direction>,
}

impl LabeledPair {
    /// Checks that a direction is given exactly for positive pairs and that
    /// `A` precedes `B` at least as often as the reverse.
    pub fn new(features: FeatureVector, relation: RelationLabel, direction: Option<Direction>) -> Result<Self> {
        if (relation == RelationLabel::Positive) != direction.is_some() {
            return Err(Error::InvalidParameter("direction label must be present iff relation is positive".into()));
        }
        if features.frequency[1] < features.frequency[2] {
            return Err(Error::InvalidParameter(alloc::format!(
                "pair ({}, {}) is not ordered by preceding frequency",
                features.pair.0,
                features.pair.1
            )));
        }
        Ok(LabeledPair {
            pair: features.pair.clone(),
            features,
            relation,
            direction,
        })
    }
}

/// Rows and labels for one task under one feature mask. Direction rows are
/// the positive pairs only; the label is `true` for forward.
pub fn task_dataset(pairs: &[LabeledPair], task: Task, mask: FeatureMask) -> (Vec<Vec<f64>>, Vec<bool>) {
    pairs
        .iter()
        .filter_map(|p| match task {
            Task::Relation => Some((p.features.select(mask), p.relation == RelationLabel::Positive)),
            Task::Direction => p.direction.map(|d| (p.features.select(mask), d == Direction::Forward)),
        })
        .unzip()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(pred: &[bool], gold: &[bool]) -> Self {
        let mut c = Confusion::default();
        for (p, g) in pred.iter().zip(gold) {
            match (p, g) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn metrics(&self) -> FoldMetrics {
        let pct = |num: usize, den: usize| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
        let precision = pct(self.tp, self.tp + self.fp);
        let recall = pct(self.tp, self.tp + self.fn_);
        FoldMetrics {
            accuracy: pct(self.tp + self.tn, self.total()),
            precision,
            recall,
            f1: harmonic(precision, recall),
            confusion: *self,
        }
    }
}

pub(crate) fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
}

/// Percentages averaged over folds and repeats. `f1` is the harmonic mean
/// of the averaged precision and recall.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fold_values: Vec<FoldMetrics>,
    pub repeats: usize,
}

impl EvalMetrics {
    pub fn from_folds(fold_values: Vec<FoldMetrics>, repeats: usize) -> Self {
        let n = fold_values.len().max(1) as f64;
        let mean = |f: fn(&FoldMetrics) -> f64| fold_values.iter().map(f).sum::<f64>() / n;
        let accuracy = mean(|m| m.accuracy);
        let precision = mean(|m| m.precision);
        let recall = mean(|m| m.recall);
        EvalMetrics {
            accuracy,
            precision,
            recall,
            f1: harmonic(precision, recall),
            fold_values,
            repeats,
        }
    }

    pub fn single(c: Confusion) -> Self {
        Self::from_folds(alloc::vec![c.metrics()], 1)
    }
}

/// Indices of a class-balanced training set: every input row once, plus
/// minority rows drawn with replacement until both classes are equal.
pub fn oversample_indices(labels: &[bool], seed: u64) -> Result<Vec<usize>> {
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    let (minority, deficit) = if pos.len() < neg.len() {
        (&pos, neg.len() - pos.len())
    } else {
        (&neg, pos.len() - neg.len())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<usize> = (0..labels.len()).collect();
    out.extend((0..deficit).map(|_| minority[rng.gen_range(0..minority.len())]));
    Ok(out)
}

pub fn oversample(train: &[LabeledPair], task: Task, seed: u64) -> Result<Vec<LabeledPair>> {
    let rows: Vec<&LabeledPair> = match task {
        Task::Relation => train.iter().collect(),
        Task::Direction => train.iter().filter(|p| p.direction.is_some()).collect(),
    };
    let labels: Vec<bool> = rows
        .iter()
        .map(|p| match task {
            Task::Relation => p.relation == RelationLabel::Positive,
            Task::Direction => p.direction == Some(Direction::Forward),
        })
        .collect();
    Ok(oversample_indices(&labels, seed)?.into_iter().map(|i| rows[i].clone()).collect())
}

pub(crate) fn shuffled(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use alloc::vec;

    /// Feature vector with the given frequency block and PMI A2 value.
    pub fn features(a: &str, b: &str, t2: f64, t3: f64, a2: f64) -> FeatureVector {
        FeatureVector {
            pair: (EventKey::parse(&alloc::format!("|{a}|")).unwrap(), EventKey::parse(&alloc::format!("|{b}|")).unwrap()),
            frequency: [t2 + t3, t2, t3, 10.0, 10.0, 10.0, 0.0, 10.0, 0.0],
            ratio: [0.0; 11],
            context: vec![0.0; 3],
            pmi: [0.0, a2, 0.0, 0.0, 0.0],
        }
    }
}
