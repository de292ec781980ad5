//! Reference predictors: a PMI threshold for relation recognition and the
//! "earlier event comes first" rule for direction.

use alloc::boxed::Box;
use alloc::vec::Vec;

use super::cv::{Learner, Predictor};
use super::{Direction, LabeledPair};
use crate::error::{Error, Result};
use crate::pairstats::FeatureMask;

/// Positive iff the pair PMI (A2) reaches `threshold`.
pub fn pmi_threshold_baseline(pairs: &[LabeledPair], threshold: f64) -> Vec<bool> {
    pairs.iter().map(|p| p.features.pmi[1] >= threshold).collect()
}

/// Threshold on one score column maximizing training accuracy. Candidates
/// are `-inf`, midpoints between distinct sorted scores and `+inf`; the
/// first best candidate wins.
pub fn fit_pmi_threshold(scores: &[f64], labels: &[bool]) -> f64 {
    let mut sorted: Vec<f64> = scores.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut candidates = Vec::with_capacity(sorted.len() + 1);
    candidates.push(f64::NEG_INFINITY);
    candidates.extend(sorted.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    candidates.push(f64::INFINITY);
    let correct = |t: f64| scores.iter().zip(labels).filter(|(s, l)| (**s >= t) == **l).count();
    let mut best = (f64::NEG_INFINITY, correct(f64::NEG_INFINITY));
    for &t in &candidates[1..] {
        let c = correct(t);
        if c > best.1 {
            best = (t, c);
        }
    }
    best.0
}

/// Every pair is predicted as `A` before `B`, where `A` is the event that
/// precedes more often.
pub fn preceding_assumption_baseline(pairs: &[LabeledPair]) -> Vec<Direction> {
    pairs.iter().map(|_| Direction::Forward).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantLearner(pub bool);

impl Predictor for ConstantLearner {
    fn predict(&self, _row: &[f64]) -> bool {
        self.0
    }
}

impl Learner for ConstantLearner {
    fn name(&self) -> &str {
        if self.0 {
            "always-true"
        } else {
            "always-false"
        }
    }

    fn fit(&self, _x: &[Vec<f64>], _y: &[bool], _mask: FeatureMask, _seed: u64) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(*self))
    }
}

/// Learns a threshold on a fixed column. Use with rows from
/// `FeatureVector::select` and the column from `pair_pmi_column`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PmiThresholdLearner {
    pub column: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Threshold {
    column: usize,
    value: f64,
}

impl Predictor for Threshold {
    fn predict(&self, row: &[f64]) -> bool {
        row[self.column] >= self.value
    }
}

impl Learner for PmiThresholdLearner {
    fn name(&self) -> &str {
        "pmi-threshold"
    }

    fn fit(&self, x: &[Vec<f64>], y: &[bool], _mask: FeatureMask, _seed: u64) -> Result<Box<dyn Predictor>> {
        if x.iter().any(|r| r.len() <= self.column) {
            return Err(Error::InvalidParameter(alloc::format!("threshold column {} out of range", self.column)));
        }
        let scores: Vec<f64> = x.iter().map(|r| r[self.column]).collect();
        Ok(Box::new(Threshold {
            column: self.column,
            value: fit_pmi_threshold(&scores, y),
        }))
    }
}
