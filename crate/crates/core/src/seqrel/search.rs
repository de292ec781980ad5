//! Exhaustive search over the fifteen non-empty feature-group subsets.

use alloc::string::String;
use alloc::vec::Vec;

use super::cv::{cross_validate, CvProtocol, Learner};
use super::{task_dataset, EvalMetrics, LabeledPair, Task};
use crate::error::{Error, Result};
use crate::pairstats::FeatureMask;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchRow {
    pub learner: String,
    pub mask: FeatureMask,
    pub metrics: EvalMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub rows: Vec<SearchRow>,
    /// Index into `rows`.
    pub best: usize,
}

impl SearchResult {
    pub fn best_row(&self) -> &SearchRow {
        &self.rows[self.best]
    }
}

/// Cross-validates every learner on every mask. The best row has the
/// highest accuracy, then F1, then the smallest mask, then the earliest
/// learner.
pub fn feature_group_search(learners: &[&dyn Learner], pairs: &[LabeledPair], task: Task, protocol: &CvProtocol) -> Result<SearchResult> {
    if learners.is_empty() {
        return Err(Error::InvalidParameter("no learners to search".into()));
    }
    let mut rows = Vec::with_capacity(learners.len() * 15);
    for learner in learners {
        for mask in FeatureMask::all_nonempty() {
            let (x, y) = task_dataset(pairs, task, mask);
            let metrics = cross_validate(*learner, &x, &y, mask, protocol)?;
            rows.push(SearchRow {
                learner: learner.name().into(),
                mask,
                metrics,
            });
        }
    }
    let mut best = 0;
    for (i, row) in rows.iter().enumerate().skip(1) {
        let b = &rows[best];
        let better = row
            .metrics
            .accuracy
            .total_cmp(&b.metrics.accuracy)
            .then(row.metrics.f1.total_cmp(&b.metrics.f1))
            .then(b.mask.order_key().cmp(&row.mask.order_key()));
        if better.is_gt() {
            best = i;
        }
    }
    Ok(SearchResult { rows, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::EventKey;
    use crate::pairstats::{FeatureGroup, FeatureVector};
    use crate::seqrel::baselines::ConstantLearner;
    use crate::seqrel::classifiers::{ClassifierKind, ClassifierSpec};
    use crate::seqrel::{Direction, RelationLabel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Only the ratio block carries the label; every other block is noise.
    fn planted(n: usize) -> Vec<LabeledPair> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        (0..n)
            .map(|i| {
                let positive = i % 2 == 0;
                let mut ratio = [0.0; 11];
                ratio.iter_mut().for_each(|r| *r = rng.gen_range(-0.2..0.2));
                ratio[0] += if positive { 1.0 } else { -1.0 };
                let fv = FeatureVector {
                    pair: (EventKey::parse("|a|").unwrap(), EventKey::parse(&alloc::format!("|b{i}|")).unwrap()),
                    frequency: core::array::from_fn(|k| match k {
                        1 => 5.0,
                        2 => 1.0,
                        _ => rng.gen_range(0.0..10.0),
                    }),
                    ratio,
                    context: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    pmi: core::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
                };
                let (rel, dir) = if positive { (RelationLabel::Positive, Some(Direction::Forward)) } else { (RelationLabel::Negative, None) };
                LabeledPair::new(fv, rel, dir).unwrap()
            })
            .collect()
    }

    #[test]
    fn search_covers_every_mask_and_finds_planted_group() {
        let pairs = planted(60);
        let lr = ClassifierSpec::new(ClassifierKind::LogisticRegression);
        let nb = ClassifierSpec::new(ClassifierKind::NaiveBayes);
        let c = ConstantLearner(true);
        let protocol = CvProtocol { repeats: 1, ..CvProtocol::default() };
        let res = feature_group_search(&[&lr, &nb, &c, &ConstantLearner(false)], &pairs, Task::Relation, &protocol).unwrap();
        assert_eq!(res.rows.len(), 60);
        let best = res.best_row();
        assert_eq!(best.mask, FeatureMask::of(&[FeatureGroup::Ratio]).unwrap());
        assert_eq!(best.metrics.accuracy, 100.0);
    }
}
