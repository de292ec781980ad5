//! Invariants checked through the public API on random inputs.

use std::collections::BTreeMap;

use elg_core::graph::{strongly_connected_components, ElgGraph, EventNode, Relation, TypedEdge};
use elg_core::pairstats::{count_document, count_pairs, pmi, transition_probability, DocumentEvents, PairCounts};
use elg_core::predict::{argmax, evaluate_mcnc, generate_mcnc, EventChain, McncConfig, McncInstance, RandomScorer, Scorer};
use elg_core::seqrel::{stratified_folds, Confusion, EvalMetrics};
use elg_core::EventKey;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn key(i: usize) -> EventKey {
    EventKey::parse(&format!("|e{i}|")).unwrap()
}

fn arb_docs() -> impl Strategy<Value = Vec<Vec<EventKey>>> {
    prop::collection::vec(prop::collection::vec((0..6usize).prop_map(key), 0..12), 1..6)
}

fn counts_of(chains: &[Vec<EventKey>], window: usize) -> (Vec<DocumentEvents>, PairCounts) {
    let docs: Vec<DocumentEvents> = chains.iter().enumerate().map(|(i, c)| DocumentEvents::from_chain(format!("d{i}"), c)).collect();
    let counts = count_pairs(&docs, window);
    (docs, counts)
}

/// Always picks the right answer.
struct Oracle;

impl Scorer for Oracle {
    fn name(&self) -> &str {
        "oracle"
    }
    fn scores(&self, _: usize, i: &McncInstance) -> Vec<f64> {
        (0..i.candidates.len()).map(|c| if c == i.answer { 1.0 } else { 0.0 }).collect()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn pair_counts_are_bounded_by_frequencies(chains in arb_docs(), window in 1..5usize) {
        let (_, counts) = counts_of(&chains, window);
        for (a, fa) in counts.events() {
            let mut paired_after = 0;
            for (b, fb) in counts.events() {
                if a == b {
                    prop_assert_eq!(counts.t1(a, b), 0);
                    continue;
                }
                prop_assert_eq!(counts.t1(a, b), counts.t2(a, b) + counts.t3(a, b));
                prop_assert!(counts.t1(a, b) <= (*fa).min(*fb));
                let p = transition_probability(a, b, &counts).unwrap();
                prop_assert!((0.0..=1.0).contains(&p));
                paired_after += counts.t2(a, b);
            }
            // each occurrence of `a` is the earlier end at most once per other event
            prop_assert!(paired_after <= fa * (counts.events().len() as u64 - 1));
        }
    }

    #[test]
    fn counting_is_additive_over_documents(chains in arb_docs(), window in 1..5usize) {
        let (docs, all) = counts_of(&chains, window);
        let mut sum = PairCounts::default();
        for d in &docs {
            sum.merge(&count_document(d, window));
        }
        prop_assert_eq!(sum.events(), all.events());
        prop_assert_eq!(sum.directed(), all.directed());
        prop_assert_eq!(all.n_events(), chains.iter().map(|c| c.len() as u64).sum::<u64>());
    }

    #[test]
    fn wider_windows_never_lose_pairs_in_one_sentence_per_event(chains in arb_docs()) {
        // with one event per sentence a wider window can only add candidates
        let (_, narrow) = counts_of(&chains, 1);
        let (_, wide) = counts_of(&chains, 100);
        prop_assert!(narrow.n_pairs() <= wide.n_pairs());
    }

    #[test]
    fn identity_relabel_changes_nothing(chains in arb_docs(), window in 1..4usize) {
        let (docs, counts) = counts_of(&chains, window);
        let relabeled: Vec<DocumentEvents> = docs.iter().map(|d| d.relabel(&BTreeMap::new())).collect();
        let again = count_pairs(&relabeled, window);
        prop_assert_eq!(again.directed(), counts.directed());
    }

    #[test]
    fn pmi_is_symmetric_and_monotone(x in 0..1000u64, y in 0..1000u64, xy in 0..500u64, extra in 1..50u64) {
        let n = x + y + xy + 1;
        prop_assert_eq!(pmi(x, y, xy, n), pmi(y, x, xy, n));
        prop_assert!(pmi(x, y, xy + extra, n) > pmi(x, y, xy, n));
    }

    #[test]
    fn folds_are_stratified(y in prop::collection::vec(any::<bool>(), 10..200), folds in 2..8usize, seed in any::<u64>()) {
        let assign = stratified_folds(&y, folds, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(assign.len(), y.len());
        prop_assert!(assign.iter().all(|&f| f < folds));
        for class in [true, false] {
            let mut per = vec![0usize; folds];
            for (i, &f) in assign.iter().enumerate() {
                if y[i] == class {
                    per[f] += 1;
                }
            }
            let (lo, hi) = (per.iter().min().unwrap(), per.iter().max().unwrap());
            prop_assert!(hi - lo <= 1, "class {} spread {:?}", class, per);
        }
    }

    #[test]
    fn f1_lies_between_precision_and_recall(pred in prop::collection::vec(any::<bool>(), 1..100), flip in any::<u64>()) {
        let gold: Vec<bool> = pred.iter().enumerate().map(|(i, p)| if (flip >> (i % 64)) & 1 == 1 { !p } else { *p }).collect();
        let m = EvalMetrics::single(Confusion::from_predictions(&pred, &gold));
        prop_assert!((0.0..=100.0).contains(&m.accuracy));
        if m.precision > 0.0 && m.recall > 0.0 {
            prop_assert!(m.f1 >= m.precision.min(m.recall) - 1e-9 && m.f1 <= m.precision.max(m.recall) + 1e-9);
        }
    }

    #[test]
    fn every_node_is_in_exactly_one_component(edges in prop::collection::btree_set((0..20u32, 0..20u32), 0..60)) {
        let nodes: Vec<EventNode> = (0..20).map(|i| EventNode::new(i, key(i as usize), 1)).collect();
        let edges: Vec<TypedEdge> = edges
            .into_iter()
            .filter(|(s, d)| s != d)
            .map(|(s, d)| {
                let mut e = TypedEdge::new(s, d, Relation::Sequential, 1);
                e.probability = Some(0.5);
                e
            })
            .collect();
        let g = ElgGraph::from_parts(nodes, edges, vec![], BTreeMap::new()).unwrap();
        let comps = strongly_connected_components(&g, None);
        let mut seen: Vec<u32> = comps.iter().flatten().copied().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..20).collect::<Vec<_>>());
        prop_assert!(comps.iter().all(|c| !c.is_empty()));
    }

    #[test]
    fn cloze_instances_are_well_formed(chains in prop::collection::vec(prop::collection::vec(0..30usize, 2..7), 1..20)) {
        let vocab: BTreeMap<EventKey, u64> = (0..30).map(|i| (key(i), 1 + i as u64)).collect();
        let chains: Vec<EventChain> = chains
            .iter()
            .enumerate()
            .map(|(i, c)| EventChain::new(format!("c{i}"), c.iter().map(|&k| key(k)).collect()).unwrap())
            .collect();
        let inst = generate_mcnc(&chains, &vocab, &McncConfig::default()).unwrap();
        for (i, c) in inst.iter().zip(&chains) {
            prop_assert_eq!(i.candidates.len(), 5);
            prop_assert_eq!(&i.candidates[i.answer], c.events.last().unwrap());
            for (j, cand) in i.candidates.iter().enumerate() {
                if j != i.answer {
                    prop_assert!(!i.context.contains(cand) && cand != &i.candidates[i.answer]);
                }
            }
        }
        prop_assert_eq!(evaluate_mcnc(&Oracle, &inst).unwrap().accuracy, 100.0);
        let r = evaluate_mcnc(&RandomScorer { seed: 1 }, &inst).unwrap();
        prop_assert!((0.0..=100.0).contains(&r.accuracy));
    }

    #[test]
    fn argmax_takes_the_first_maximum(scores in prop::collection::vec(-3..3i32, 1..10)) {
        let s: Vec<f64> = scores.iter().map(|&x| x as f64).collect();
        let best = argmax(&s);
        let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(s[best], max);
        prop_assert!(s[..best].iter().all(|&x| x < max));
    }
}
