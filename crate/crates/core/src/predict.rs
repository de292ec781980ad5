//! Multiple-choice narrative cloze: instance generation and scorers.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embeddings::{cosine, VectorSource};
use crate::error::{Error, Result};
use crate::events::EventKey;
use crate::graph::{scc_index, ElgGraph, NodeId, Relation};
use crate::math;
use crate::pairstats::{pmi, PairCounts};

/// Events of one document in text order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventChain {
    pub id: String,
    pub events: Vec<EventKey>,
}

impl EventChain {
    pub fn new(id: impl Into<String>, events: Vec<EventKey>) -> Result<Self> {
        let id = id.into();
        if events.len() < 2 {
            return Err(Error::InvalidParameter(alloc::format!("chain {id} has fewer than two events")));
        }
        Ok(EventChain { id, events })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McncInstance {
    pub chain_id: String,
    pub context: Vec<EventKey>,
    pub candidates: Vec<EventKey>,
    pub answer: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistractorPolicy {
    /// Sampled in proportion to corpus frequency.
    #[default]
    Frequency,
    Uniform,
}

impl DistractorPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "frequency" => Some(DistractorPolicy::Frequency),
            "uniform" => Some(DistractorPolicy::Uniform),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McncConfig {
    pub n_candidates: usize,
    pub seed: u64,
    pub policy: DistractorPolicy,
}

impl Default for McncConfig {
    fn default() -> Self {
        McncConfig {
            n_candidates: 5,
            seed: 7,
            policy: DistractorPolicy::Frequency,
        }
    }
}

fn instance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Weighted draw of `k` distinct items.
fn weighted_sample<'a>(pool: &[(&'a EventKey, u64)], k: usize, rng: &mut ChaCha8Rng) -> Option<Vec<&'a EventKey>> {
    let mut pool: Vec<(&EventKey, u64)> = pool.iter().copied().filter(|(_, w)| *w > 0).collect();
    if pool.len() < k {
        return None;
    }
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let total: u64 = pool.iter().map(|(_, w)| w).sum();
        let mut r = rng.gen_range(0..total);
        let pick = pool
            .iter()
            .position(|(_, w)| {
                if r < *w {
                    true
                } else {
                    r -= w;
                    false
                }
            })
            .expect("draw below total weight");
        out.push(pool.swap_remove(pick).0);
    }
    Some(out)
}

/// One instance per chain: the last event is the answer, the rest is the
/// context, and distractors come from `vocabulary` minus both.
pub fn generate_mcnc(chains: &[EventChain], vocabulary: &BTreeMap<EventKey, u64>, config: &McncConfig) -> Result<Vec<McncInstance>> {
    if config.n_candidates == 0 {
        return Err(Error::InvalidParameter("need at least one candidate".into()));
    }
    let need = config.n_candidates - 1;
    chains
        .iter()
        .enumerate()
        .map(|(i, chain)| {
            let (answer, context) = chain.events.split_last().expect("chains have two or more events");
            let excluded: BTreeSet<&EventKey> = context.iter().chain([answer]).collect();
            let pool: Vec<(&EventKey, u64)> = vocabulary.iter().filter(|(k, _)| !excluded.contains(k)).map(|(k, f)| (k, *f)).collect();
            let mut rng = instance_rng(config.seed, i);
            let drawn = match config.policy {
                DistractorPolicy::Frequency => weighted_sample(&pool, need, &mut rng),
                DistractorPolicy::Uniform => (pool.len() >= need).then(|| rand::seq::index::sample(&mut rng, pool.len(), need).into_iter().map(|j| pool[j].0).collect()),
            };
            let Some(drawn) = drawn else {
                return Err(Error::DistractorPool {
                    need,
                    have: pool.iter().filter(|(_, f)| config.policy == DistractorPolicy::Uniform || *f > 0).count(),
                });
            };
            let mut candidates: Vec<EventKey> = drawn.into_iter().cloned().collect();
            candidates.push(answer.clone());
            candidates.shuffle(&mut rng);
            let answer = candidates.iter().position(|c| c == answer).expect("answer was inserted");
            Ok(McncInstance {
                chain_id: chain.id.clone(),
                context: context.to_vec(),
                candidates,
                answer,
            })
        })
        .collect()
}

/// Assigns a score to every candidate; the highest wins.
pub trait Scorer {
    fn name(&self) -> &str;
    /// `index` is the instance position, for scorers that need per-instance
    /// randomness.
    fn scores(&self, index: usize, instance: &McncInstance) -> Vec<f64>;
}

/// First index holding the maximum score.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
pub struct RandomScorer {
    pub seed: u64,
}

impl Scorer for RandomScorer {
    fn name(&self) -> &str {
        "random"
    }

    fn scores(&self, index: usize, instance: &McncInstance) -> Vec<f64> {
        let mut rng = instance_rng(self.seed, index);
        let pick = rng.gen_range(0..instance.candidates.len().max(1));
        (0..instance.candidates.len()).map(|i| if i == pick { 1.0 } else { 0.0 }).collect()
    }
}

/// Sum of smoothed PMI between each context event and the candidate.
pub struct PmiScorer<'a> {
    pub counts: &'a PairCounts,
}

impl Scorer for PmiScorer<'_> {
    fn name(&self) -> &str {
        "pmi"
    }

    fn scores(&self, _index: usize, instance: &McncInstance) -> Vec<f64> {
        let c = self.counts;
        let n = c.n_events();
        instance
            .candidates
            .iter()
            .map(|cand| instance.context.iter().map(|e| pmi(c.freq(e), c.freq(cand), c.t1(e, cand), n)).sum())
            .collect()
    }
}

/// Sum of add-one smoothed `ln P(candidate | context event)` from directed
/// counts.
pub struct BigramScorer<'a> {
    pub counts: &'a PairCounts,
}

impl Scorer for BigramScorer<'_> {
    fn name(&self) -> &str {
        "bigram"
    }

    fn scores(&self, _index: usize, instance: &McncInstance) -> Vec<f64> {
        let c = self.counts;
        let v = c.events().len() as f64;
        instance
            .candidates
            .iter()
            .map(|cand| {
                instance
                    .context
                    .iter()
                    .map(|e| math::ln((c.t2(e, cand) as f64 + 1.0) / (c.freq(e) as f64 + v)))
                    .sum()
            })
            .collect()
    }
}

/// Cosine between the candidate vector and the mean context vector.
pub struct EmbeddingScorer<'a> {
    pub vectors: &'a dyn VectorSource,
}

impl Scorer for EmbeddingScorer<'_> {
    fn name(&self) -> &str {
        "embedding"
    }

    fn scores(&self, _index: usize, instance: &McncInstance) -> Vec<f64> {
        let ctx: Vec<Vec<f64>> = instance.context.iter().filter_map(|e| self.vectors.event_vector(e)).collect();
        let Some(dim) = ctx.first().map(Vec::len) else {
            return vec![0.0; instance.candidates.len()];
        };
        let mut mean = vec![0.0; dim];
        for v in ctx.iter().filter(|v| v.len() == dim) {
            mean.iter_mut().zip(v).for_each(|(m, x)| *m += x / ctx.len() as f64);
        }
        instance
            .candidates
            .iter()
            .map(|c| self.vectors.event_vector(c).and_then(|v| cosine(&v, &mean).ok()).unwrap_or(0.0))
            .collect()
    }
}

/// Walk score over the graph: summed transition probability from the
/// context into the candidate, plus `beta` when the candidate shares a
/// sequential strongly connected component with a context event.
pub struct GraphScorer<'a> {
    pub graph: &'a ElgGraph,
    pub beta: f64,
    scc: Vec<usize>,
}

impl<'a> GraphScorer<'a> {
    pub const DEFAULT_BETA: f64 = 0.1;

    pub fn new(graph: &'a ElgGraph, beta: f64) -> Self {
        GraphScorer {
            graph,
            beta,
            scc: scc_index(graph, Some(Relation::Sequential)),
        }
    }

    fn direct(&self, context: &[NodeId], cand: NodeId) -> f64 {
        let flow: f64 = context
            .iter()
            .filter_map(|&c| self.graph.edge(c, cand, Relation::Sequential))
            .filter_map(|e| e.probability)
            .sum();
        let shares = context.iter().any(|&c| c != cand && self.scc[c as usize] == self.scc[cand as usize]);
        flow + if shares { self.beta } else { 0.0 }
    }

    pub fn score(&self, context: &[EventKey], candidate: &EventKey) -> f64 {
        let ctx: Vec<NodeId> = context.iter().filter_map(|k| self.graph.resolve(k)).collect();
        let Some(cand) = self.graph.resolve(candidate) else { return 0.0 };
        let direct = self.direct(&ctx, cand);
        if direct > 0.0 {
            return direct;
        }
        // fall back to the most similar linked node
        let best = self.graph.links_of(cand).max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        best.map_or(0.0, |(other, _)| self.direct(&ctx, other))
    }
}

impl Scorer for GraphScorer<'_> {
    fn name(&self) -> &str {
        "graph"
    }

    fn scores(&self, _index: usize, instance: &McncInstance) -> Vec<f64> {
        instance.candidates.iter().map(|c| self.score(&instance.context, c)).collect()
    }
}

/// Scores a candidate by calling back into arbitrary code.
pub struct FnScorer<F> {
    pub name: &'static str,
    pub f: F,
}

impl<F: Fn(usize, &McncInstance) -> Vec<f64>> Scorer for FnScorer<F> {
    fn name(&self) -> &str {
        self.name
    }

    fn scores(&self, index: usize, instance: &McncInstance) -> Vec<f64> {
        (self.f)(index, instance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McncReport {
    pub scorer: String,
    pub accuracy: f64,
    pub chosen: Vec<usize>,
    pub correct: Vec<bool>,
}

impl McncReport {
    /// Two-sided paired t-test p-value over per-instance correctness.
    pub fn p_value_against(&self, other: &McncReport) -> f64 {
        let as_f = |v: &[bool]| v.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
        math::paired_t_test(&as_f(&self.correct), &as_f(&other.correct))
    }
}

pub fn evaluate_mcnc(scorer: &dyn Scorer, instances: &[McncInstance]) -> Result<McncReport> {
    if instances.is_empty() {
        return Err(Error::InvalidParameter("no MCNC instances".into()));
    }
    let chosen: Vec<usize> = instances.iter().enumerate().map(|(i, inst)| argmax(&scorer.scores(i, inst))).collect();
    let correct: Vec<bool> = chosen.iter().zip(instances).map(|(c, inst)| *c == inst.answer).collect();
    let hits = correct.iter().filter(|c| **c).count();
    Ok(McncReport {
        scorer: scorer.name().into(),
        accuracy: 100.0 * hits as f64 / instances.len() as f64,
        chosen,
        correct,
    })
}
