//! Skip-gram word embeddings with negative sampling, additive event
//! composition and cosine similarity.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::ParsedCorpus;
use crate::error::{Error, Result};
use crate::events::EventKey;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub negative_samples: usize,
    pub min_count: u64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 100,
            window: 5,
            epochs: 5,
            negative_samples: 5,
            min_count: 5,
            learning_rate: 0.025,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainingMeta {
    pub window: usize,
    pub epochs: usize,
    pub negative_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    vocab: BTreeMap<String, usize>,
    vectors: Vec<f64>,
    pub meta: Option<TrainingMeta>,
}

impl EmbeddingTable {
    /// Builds a table from `(word, vector)` rows, e.g. pretrained vectors.
    pub fn from_rows(dim: usize, rows: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("embedding dim must be >= 1".into()));
        }
        let mut words = Vec::with_capacity(rows.len());
        let mut vocab = BTreeMap::new();
        let mut vectors = Vec::with_capacity(rows.len() * dim);
        for (word, v) in rows {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { left: dim, right: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(alloc::format!("non-finite vector for `{word}`")));
            }
            if vocab.contains_key(&word) {
                return Err(Error::InvalidParameter(alloc::format!("duplicate word `{word}`")));
            }
            vocab.insert(word.clone(), words.len());
            words.push(word);
            vectors.extend(v);
        }
        Ok(EmbeddingTable {
            dim,
            words,
            vocab,
            vectors,
            meta: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Words in row order.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index(&self, word: &str) -> Option<usize> {
        self.vocab.get(word).copied()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index(word).map(|i| self.row(i))
    }
}

/// Per-epoch average loss plus a finer curve over the first epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    pub epoch_losses: Vec<f64>,
    pub first_epoch_curve: Vec<f64>,
}

pub fn train_skipgram(corpus: &ParsedCorpus, config: &SkipGramConfig) -> Result<EmbeddingTable> {
    train_skipgram_traced(corpus, config).map(|(t, _)| t)
}

pub fn train_skipgram_traced(corpus: &ParsedCorpus, config: &SkipGramConfig) -> Result<(EmbeddingTable, TrainingTrace)> {
    let sentences: Vec<Vec<String>> = corpus
        .sentences()
        .map(|s| s.tokens.iter().map(|t| t.lemma.to_lowercase()).collect())
        .collect();
    train_on_sequences(&sentences, config)
}

/// Skip-gram training over raw lemma sequences.
pub fn train_on_sequences(sentences: &[Vec<String>], config: &SkipGramConfig) -> Result<(EmbeddingTable, TrainingTrace)> {
    if sentences.iter().all(Vec::is_empty) {
        return Err(Error::EmptyCorpus);
    }
    if config.dim == 0 || config.window == 0 {
        return Err(Error::InvalidParameter("dim and window must be >= 1".into()));
    }

    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for w in sentences.iter().flatten() {
        *counts.entry(w.as_str()).or_insert(0) += 1;
    }
    let mut kept: Vec<(&str, u64)> = counts.into_iter().filter(|(_, c)| *c >= config.min_count).collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    // Frequency-descending row order, lexicographic among ties.
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let vocab: BTreeMap<String, usize> = kept.iter().enumerate().map(|(i, (w, _))| (String::from(*w), i)).collect();
    let words: Vec<String> = kept.iter().map(|(w, _)| String::from(*w)).collect();

    let encoded: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().filter_map(|w| vocab.get(w).copied()).collect())
        .collect();
    let noise = NoiseTable::new(&kept.iter().map(|(_, c)| *c).collect::<Vec<_>>());

    let dim = config.dim;
    let n = words.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut input: Vec<f64> = (0..n * dim).map(|_| (rng.gen::<f64>() - 0.5) / dim as f64).collect();
    let mut output = vec![0.0; n * dim];
    let mut grad = vec![0.0; dim];

    let tokens_per_epoch: usize = encoded.iter().map(Vec::len).sum();
    let total = (tokens_per_epoch * config.epochs).max(1) as f64;
    let curve_chunk = (tokens_per_epoch / 10).max(1);
    let mut trace = TrainingTrace::default();
    let mut processed = 0usize;

    for epoch in 0..config.epochs {
        let mut epoch_loss = 0.0;
        let mut epoch_updates = 0usize;
        let mut chunk_loss = 0.0;
        let mut chunk_updates = 0usize;
        let mut seen_in_epoch = 0usize;
        for sent in &encoded {
            for (pos, &center) in sent.iter().enumerate() {
                let lr = (config.learning_rate * (1.0 - processed as f64 / total)).max(config.learning_rate * 1e-4);
                processed += 1;
                seen_in_epoch += 1;
                let lo = pos.saturating_sub(config.window);
                let hi = (pos + config.window).min(sent.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = sent[ctx_pos];
                    let loss = sgns_update(
                        &mut input,
                        &mut output,
                        &mut grad,
                        dim,
                        center,
                        context,
                        config.negative_samples,
                        &noise,
                        &mut rng,
                        lr,
                    );
                    if !loss.is_finite() {
                        return Err(Error::Diverged);
                    }
                    epoch_loss += loss;
                    epoch_updates += 1;
                    chunk_loss += loss;
                    chunk_updates += 1;
                }
                if epoch == 0 && seen_in_epoch % curve_chunk == 0 && chunk_updates > 0 {
                    trace.first_epoch_curve.push(chunk_loss / chunk_updates as f64);
                    chunk_loss = 0.0;
                    chunk_updates = 0;
                }
            }
        }
        trace
            .epoch_losses
            .push(if epoch_updates > 0 { epoch_loss / epoch_updates as f64 } else { 0.0 });
    }

    let table = EmbeddingTable {
        dim,
        words,
        vocab,
        vectors: input,
        meta: Some(TrainingMeta {
            window: config.window,
            epochs: config.epochs,
            negative_samples: config.negative_samples,
            seed: config.seed,
        }),
    };
    Ok((table, trace))
}

/// One positive pair plus its negatives. Returns the pair's loss.
#[allow(clippy::too_many_arguments)]
fn sgns_update(
    input: &mut [f64],
    output: &mut [f64],
    grad: &mut [f64],
    dim: usize,
    center: usize,
    context: usize,
    negatives: usize,
    noise: &NoiseTable,
    rng: &mut ChaCha8Rng,
    lr: f64,
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    let c = center * dim;
    for k in 0..=negatives {
        let (target, label) = if k == 0 {
            (context, 1.0)
        } else {
            let t = noise.sample(rng);
            if t == context {
                continue;
            }
            (t, 0.0)
        };
        let o = target * dim;
        let score = math::dot(&input[c..c + dim], &output[o..o + dim]);
        let p = math::sigmoid(score);
        loss += if label > 0.0 { math::softplus(-score) } else { math::softplus(score) };
        let g = lr * (label - p);
        for d in 0..dim {
            grad[d] += g * output[o + d];
            output[o + d] += g * input[c + d];
        }
    }
    for d in 0..dim {
        input[c + d] += grad[d];
    }
    loss
}

/// Unigram^0.75 sampler over vocabulary rows.
struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += libm::pow(c as f64, 0.75);
                acc
            })
            .collect();
        NoiseTable { cumulative }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = *self.cumulative.last().unwrap_or(&0.0);
        let r = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= r).min(self.cumulative.len() - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventVector {
    pub event: EventKey,
    pub vec: Vec<f64>,
    /// Set when no slot lemma is in the vocabulary; `vec` is then zero.
    pub oov: bool,
}

/// Mean of the in-vocabulary slot lemma vectors.
pub fn embed_event(event: &EventKey, table: &EmbeddingTable) -> EventVector {
    let mut vec = vec![0.0; table.dim()];
    let mut n = 0usize;
    for lemma in event.lemmas() {
        if let Some(v) = table.get(lemma) {
            vec.iter_mut().zip(v).for_each(|(a, b)| *a += b);
            n += 1;
        }
    }
    if n > 0 {
        vec.iter_mut().for_each(|a| *a /= n as f64);
    }
    EventVector {
        event: event.clone(),
        vec,
        oov: n == 0,
    }
}

/// Cosine similarity; 0 when either side is the zero vector.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { left: u.len(), right: v.len() });
    }
    let nu = math::norm(u);
    let nv = math::norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((math::dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Anything that can produce a vector for an event key.
pub trait VectorSource {
    /// `None` when the event cannot be represented.
    fn event_vector(&self, event: &EventKey) -> Option<Vec<f64>>;
}

impl VectorSource for EmbeddingTable {
    fn event_vector(&self, event: &EventKey) -> Option<Vec<f64>> {
        let ev = embed_event(event, self);
        (!ev.oov).then_some(ev.vec)
    }
}

impl VectorSource for BTreeMap<EventKey, Vec<f64>> {
    fn event_vector(&self, event: &EventKey) -> Option<Vec<f64>> {
        self.get(event).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::flat;
    use crate::corpus::Document;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn table(rows: &[(&str, &[f64])]) -> EmbeddingTable {
        let dim = rows[0].1.len();
        EmbeddingTable::from_rows(dim, rows.iter().map(|(w, v)| (w.to_string(), v.to_vec())).collect()).unwrap()
    }

    fn corpus_of(sentences: &[Vec<&str>]) -> ParsedCorpus {
        let sentences = sentences.iter().enumerate().map(|(i, s)| flat("d", i, s)).collect();
        ParsedCorpus {
            documents: vec![Document {
                doc_id: "d".into(),
                sentences,
            }],
            source_meta: BTreeMap::new(),
        }
    }

    #[test]
    fn mean_composition() {
        let t = table(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0]), ("c", &[1.0, 1.0])]);
        let ev = embed_event(&EventKey::parse("a|b|c").unwrap(), &t);
        assert!(!ev.oov);
        assert!((ev.vec[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((ev.vec[1] - 2.0 / 3.0).abs() < 1e-15);

        let ev = embed_event(&EventKey::parse("x|y|z").unwrap(), &t);
        assert!(ev.oov);
        assert_eq!(ev.vec, vec![0.0, 0.0]);

        let ev = embed_event(&EventKey::parse("|b|").unwrap(), &t);
        assert_eq!(ev.vec, vec![0.0, 1.0]);
    }

    #[test]
    fn cosine_anchors() {
        assert!((cosine(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 2.0], &[-1.0, -2.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(cosine(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn distributional_synonyms_end_up_close() {
        // coffee and tea share every context; car lives elsewhere.
        let mut sents = Vec::new();
        for _ in 0..60 {
            sents.push(vec!["i", "drink", "hot", "coffee", "every", "morning"]);
            sents.push(vec!["i", "drink", "hot", "tea", "every", "morning"]);
            sents.push(vec!["they", "repair", "the", "car", "in", "garage"]);
            sents.push(vec!["we", "wash", "the", "truck", "in", "garage"]);
        }
        let cfg = SkipGramConfig {
            dim: 16,
            window: 2,
            epochs: 10,
            min_count: 1,
            seed: 7,
            ..SkipGramConfig::default()
        };
        let t = train_skipgram(&corpus_of(&sents), &cfg).unwrap();
        let cos = |a: &str, b: &str| cosine(t.get(a).unwrap(), t.get(b).unwrap()).unwrap();
        assert!(cos("coffee", "tea") > cos("coffee", "car"));
        assert!(cos("coffee", "tea") > cos("coffee", "garage"));
    }

    #[test]
    fn one_dimensional_single_sentence() {
        let cfg = SkipGramConfig {
            dim: 1,
            min_count: 1,
            epochs: 2,
            ..SkipGramConfig::default()
        };
        let t = train_skipgram(&corpus_of(&[vec!["a", "b", "c"]]), &cfg).unwrap();
        assert_eq!(t.dim(), 1);
        assert_eq!(t.len(), 3);
        assert!((0..3).all(|i| t.row(i)[0].is_finite()));
    }

    #[test]
    fn same_seed_same_table() {
        let c = corpus_of(&[vec!["a", "b", "c", "a"], vec!["b", "c", "d"]]);
        let cfg = SkipGramConfig {
            dim: 8,
            min_count: 1,
            ..SkipGramConfig::default()
        };
        let a = train_skipgram(&c, &cfg).unwrap();
        let b = train_skipgram(&c, &cfg).unwrap();
        assert_eq!(a, b);
        let bits = |t: &EmbeddingTable| (0..t.len()).flat_map(|i| t.row(i).to_vec()).map(f64::to_bits).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert_eq!(train_skipgram(&ParsedCorpus::default(), &SkipGramConfig::default()), Err(Error::EmptyCorpus));
        let c = corpus_of(&[vec!["a", "b"]]);
        assert_eq!(train_skipgram(&c, &SkipGramConfig::default()), Err(Error::EmptyVocabulary));
    }

    #[test]
    fn loss_decreases_over_first_epoch() {
        let mut sents = Vec::new();
        for i in 0..200 {
            let w = ["alpha", "beta", "gamma", "delta"][i % 4];
            sents.push(vec!["the", w, "moves", "fast", "then", "stops"]);
        }
        let cfg = SkipGramConfig {
            dim: 10,
            window: 2,
            epochs: 1,
            min_count: 1,
            ..SkipGramConfig::default()
        };
        let (_, trace) = train_skipgram_traced(&corpus_of(&sents), &cfg).unwrap();
        let curve = &trace.first_epoch_curve;
        assert!(curve.len() >= 5);
        let first = curve[0];
        let last = *curve.last().unwrap();
        assert!(last < first * 0.95, "first={first} last={last}");
    }

    proptest! {
        #[test]
        fn cosine_symmetry_and_scale(u in proptest::collection::vec(-5.0f64..5.0, 4), v in proptest::collection::vec(-5.0f64..5.0, 4), a in 0.01f64..100.0) {
            let c = cosine(&u, &v).unwrap();
            prop_assert!((c - cosine(&v, &u).unwrap()).abs() < 1e-12);
            let scaled: Vec<f64> = u.iter().map(|x| x * a).collect();
            prop_assert!((c - cosine(&scaled, &v).unwrap()).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&c));
        }

        #[test]
        fn composition_ignores_slot_order(perm in Just(vec!["a", "b", "c"]).prop_shuffle()) {
            let t = table(&[("a", &[1.0, 0.5]), ("b", &[0.25, 1.0]), ("c", &[-1.0, 2.0])]);
            let k1 = EventKey::parse("|p|a_b_c").unwrap();
            let k2 = EventKey::parse(&alloc::format!("|p|{}", perm.join("_"))).unwrap();
            let e1 = embed_event(&k1, &t).vec;
            let e2 = embed_event(&k2, &t).vec;
            for (x, y) in e1.iter().zip(&e2) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
