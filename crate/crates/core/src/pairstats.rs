//! Event pair co-occurrence statistics, pair features and transition
//! probabilities.
//!
//! Counting scheme: within one document, occurrences are visited in text
//! order. When an occurrence `x` of event `K` arrives it is paired with the
//! nearest earlier occurrence `y` of every other event `L` that lies within
//! `window` sentences and has not already been paired with an occurrence of
//! `K`. Each such pairing adds one to the directed count `(L, K)`. For any
//! two events the pairings form a matching between their occurrences, so
//! `t1(A,B) <= min(f(A), f(B))` and `t2(A,B) <= f(A)`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::Document;
use crate::embeddings::{embed_event, EmbeddingTable};
use crate::error::{Error, Result};
use crate::events::{EventKey, EventOccurrence};
use crate::math;

/// Occurrences of one document in text order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentEvents {
    pub doc_id: String,
    pub occurrences: Vec<EventOccurrence>,
    pub n_tokens: u64,
}

impl DocumentEvents {
    pub fn new(doc_id: impl Into<String>, mut occurrences: Vec<EventOccurrence>, n_tokens: u64) -> Self {
        occurrences.sort_by_key(|o| (o.sent_index, o.predicate_pos));
        DocumentEvents {
            doc_id: doc_id.into(),
            occurrences,
            n_tokens,
        }
    }

    /// A synthetic document where every event sits in its own sentence.
    pub fn from_chain(doc_id: impl Into<String>, chain: &[EventKey]) -> Self {
        let doc_id = doc_id.into();
        let occurrences = chain
            .iter()
            .enumerate()
            .map(|(i, k)| EventOccurrence {
                event: k.clone(),
                doc_id: doc_id.clone(),
                sent_index: i,
                token_span: crate::events::TokenSpan::new(0, 0),
                predicate_pos: 0,
                extra: Vec::new(),
            })
            .collect();
        DocumentEvents {
            doc_id,
            occurrences,
            n_tokens: chain.len() as u64,
        }
    }

    /// Rewrites event keys through `map`; unmapped keys are kept.
    pub fn relabel(&self, map: &BTreeMap<EventKey, EventKey>) -> Self {
        let mut out = self.clone();
        for o in &mut out.occurrences {
            if let Some(k) = map.get(&o.event) {
                o.event = k.clone();
            }
        }
        out
    }
}

/// Pairings `(earlier, later)` as indices into `doc.occurrences`, in the
/// order they are made.
pub fn matched_pairs(doc: &DocumentEvents, window: usize) -> Vec<(usize, usize)> {
    let occ = &doc.occurrences;
    let mut used: BTreeSet<(usize, &EventKey)> = BTreeSet::new();
    let mut out = Vec::new();
    for (i, x) in occ.iter().enumerate() {
        for j in (0..i).rev() {
            let y = &occ[j];
            if x.sent_index - y.sent_index > window {
                break;
            }
            if y.event == x.event || used.contains(&(i, &y.event)) || used.contains(&(j, &x.event)) {
                continue;
            }
            used.insert((i, &y.event));
            used.insert((j, &x.event));
            out.push((j, i));
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairCounts {
    events: BTreeMap<EventKey, u64>,
    verbs: BTreeMap<String, u64>,
    objects: BTreeMap<String, u64>,
    directed: BTreeMap<(EventKey, EventKey), u64>,
    n_tokens: u64,
}

impl PairCounts {
    pub fn add_event(&mut self, key: &EventKey, count: u64) {
        *self.events.entry(key.clone()).or_insert(0) += count;
        *self.verbs.entry(String::from(key.predicate())).or_insert(0) += count;
        if !key.object().is_empty() {
            *self.objects.entry(String::from(key.object())).or_insert(0) += count;
        }
    }

    /// Adds `count` to the directed count of `earlier` before `later`.
    pub fn add_directed(&mut self, earlier: &EventKey, later: &EventKey, count: u64) {
        *self.directed.entry((earlier.clone(), later.clone())).or_insert(0) += count;
    }

    pub fn add_tokens(&mut self, n: u64) {
        self.n_tokens += n;
    }

    /// Sums another tally into this one.
    pub fn merge(&mut self, other: &PairCounts) {
        for (k, c) in &other.events {
            self.add_event(k, *c);
        }
        for ((a, b), c) in &other.directed {
            self.add_directed(a, b, *c);
        }
        self.n_tokens += other.n_tokens;
    }

    /// `f(A)`: number of occurrences of `A` (T4/T5).
    pub fn freq(&self, key: &EventKey) -> u64 {
        self.events.get(key).copied().unwrap_or(0)
    }

    /// Occurrences sharing the predicate of `key` (T6/T8).
    pub fn verb_freq(&self, key: &EventKey) -> u64 {
        self.verbs.get(key.predicate()).copied().unwrap_or(0)
    }

    /// Occurrences sharing the object of `key` (T7/T9); 0 when it has none.
    pub fn object_freq(&self, key: &EventKey) -> u64 {
        if key.object().is_empty() {
            return 0;
        }
        self.objects.get(key.object()).copied().unwrap_or(0)
    }

    /// T2: `a` before `b`.
    pub fn t2(&self, a: &EventKey, b: &EventKey) -> u64 {
        self.directed.get(&(a.clone(), b.clone())).copied().unwrap_or(0)
    }

    /// T3: `b` before `a`.
    pub fn t3(&self, a: &EventKey, b: &EventKey) -> u64 {
        self.t2(b, a)
    }

    /// T1: all co-occurrences of the pair.
    pub fn t1(&self, a: &EventKey, b: &EventKey) -> u64 {
        self.t2(a, b) + self.t3(a, b)
    }

    pub fn n_events(&self) -> u64 {
        self.events.values().sum()
    }

    pub fn n_pairs(&self) -> u64 {
        self.directed.values().sum()
    }

    pub fn n_tokens(&self) -> u64 {
        self.n_tokens
    }

    pub fn events(&self) -> &BTreeMap<EventKey, u64> {
        &self.events
    }

    pub fn directed(&self) -> &BTreeMap<(EventKey, EventKey), u64> {
        &self.directed
    }

    /// Unordered pairs `(a, b)` with `a < b` and `t1 > 0`.
    pub fn unordered_pairs(&self) -> Vec<(EventKey, EventKey)> {
        let set: BTreeSet<(EventKey, EventKey)> = self
            .directed
            .keys()
            .map(|(a, b)| if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) })
            .collect();
        set.into_iter().collect()
    }

    /// Joint counts at argument level, derived from the pair table.
    pub fn argument_stats(&self) -> ArgumentStats {
        let mut stats = ArgumentStats::default();
        for ((x, y), &c) in &self.directed {
            let (vx, vy) = (x.predicate(), y.predicate());
            let (ox, oy) = (x.object(), y.object());
            *stats.verb_verb.entry(ordered(vx, vy)).or_insert(0) += c;
            if !oy.is_empty() {
                *stats.verb_object.entry((String::from(vx), String::from(oy))).or_insert(0) += c;
            }
            if !ox.is_empty() {
                *stats.verb_object.entry((String::from(vy), String::from(ox))).or_insert(0) += c;
            }
            if !ox.is_empty() && !oy.is_empty() {
                *stats.object_object.entry(ordered(ox, oy)).or_insert(0) += c;
            }
        }
        stats
    }
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (String::from(a), String::from(b))
    } else {
        (String::from(b), String::from(a))
    }
}

/// Co-occurrence counts between predicates and objects of paired events.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ArgumentStats {
    verb_verb: BTreeMap<(String, String), u64>,
    verb_object: BTreeMap<(String, String), u64>,
    object_object: BTreeMap<(String, String), u64>,
}

impl ArgumentStats {
    pub fn verb_verb(&self, a: &str, b: &str) -> u64 {
        self.verb_verb.get(&ordered(a, b)).copied().unwrap_or(0)
    }

    pub fn verb_object(&self, verb: &str, object: &str) -> u64 {
        if object.is_empty() {
            return 0;
        }
        self.verb_object
            .get(&(String::from(verb), String::from(object)))
            .copied()
            .unwrap_or(0)
    }

    pub fn object_object(&self, a: &str, b: &str) -> u64 {
        if a.is_empty() || b.is_empty() {
            return 0;
        }
        self.object_object.get(&ordered(a, b)).copied().unwrap_or(0)
    }
}

/// Counts events and ordered pairs over per-document streams.
pub fn count_pairs(docs: &[DocumentEvents], window: usize) -> PairCounts {
    let mut counts = PairCounts::default();
    for doc in docs {
        counts.merge(&count_document(doc, window));
    }
    counts
}

pub fn count_document(doc: &DocumentEvents, window: usize) -> PairCounts {
    let mut counts = PairCounts::default();
    for o in &doc.occurrences {
        counts.add_event(&o.event, 1);
    }
    for (i, j) in matched_pairs(doc, window) {
        counts.add_directed(&doc.occurrences[i].event, &doc.occurrences[j].event, 1);
    }
    counts.add_tokens(doc.n_tokens);
    counts
}

pub const PMI_SMOOTHING: f64 = 1.0;

/// Smoothed PMI: `ln(((xy + e) * n) / ((x + e) * (y + e)))` with `e = 1`.
pub fn pmi(x_count: u64, y_count: u64, xy_count: u64, n: u64) -> f64 {
    pmi_with(x_count as f64, y_count as f64, xy_count as f64, n as f64, PMI_SMOOTHING)
}

pub fn pmi_with(x: f64, y: f64, xy: f64, n: f64, eps: f64) -> f64 {
    math::ln(((xy + eps) * n) / ((x + eps) * (y + eps)))
}

/// `P(B|A) = t2(A,B) / f(A)`.
pub fn transition_probability(a: &EventKey, b: &EventKey, counts: &PairCounts) -> Result<f64> {
    let fa = counts.freq(a);
    if fa == 0 {
        return Err(Error::UndefinedEvent(String::from(a.as_str())));
    }
    Ok(counts.t2(a, b) as f64 / fa as f64)
}

/// Tokens lying between two paired occurrences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoOccurrenceContext {
    /// Event keys in text order.
    pub earlier: EventKey,
    pub later: EventKey,
    pub doc_id: String,
    pub first_sentence: usize,
    pub last_sentence: usize,
    pub lemmas: Vec<String>,
    pub pos: Vec<String>,
}

impl CoOccurrenceContext {
    pub fn is_for(&self, a: &EventKey, b: &EventKey) -> bool {
        (&self.earlier == a && &self.later == b) || (&self.earlier == b && &self.later == a)
    }
}

/// One context per pairing made by the counting scheme.
pub fn collect_contexts(doc_events: &DocumentEvents, doc: &Document, window: usize) -> Vec<CoOccurrenceContext> {
    let occ = &doc_events.occurrences;
    matched_pairs(doc_events, window)
        .into_iter()
        .map(|(i, j)| {
            let (e, l) = (&occ[i], &occ[j]);
            let mut lemmas = Vec::new();
            let mut pos = Vec::new();
            for s in e.sent_index..=l.sent_index {
                let Some(sentence) = doc.sentences.get(s) else { continue };
                let from = if s == e.sent_index { e.token_span.end + 1 } else { 0 };
                let to = if s == l.sent_index { l.token_span.start } else { sentence.tokens.len() };
                for t in sentence.tokens.iter().take(to).skip(from) {
                    lemmas.push(t.lemma.to_lowercase());
                    pos.push(t.pos.clone());
                }
            }
            CoOccurrenceContext {
                earlier: e.event.clone(),
                later: l.event.clone(),
                doc_id: doc_events.doc_id.clone(),
                first_sentence: e.sent_index,
                last_sentence: l.sent_index,
                lemmas,
                pos,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureGroup {
    Frequency,
    Ratio,
    Context,
    Pmi,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [FeatureGroup::Frequency, FeatureGroup::Ratio, FeatureGroup::Context, FeatureGroup::Pmi];

    pub fn bit(self) -> u8 {
        1 << (self as u8)
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Frequency => "frequency",
            FeatureGroup::Ratio => "ratio",
            FeatureGroup::Context => "context",
            FeatureGroup::Pmi => "pmi",
        }
    }
}

/// Nonempty subset of the four feature groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureMask(u8);

impl FeatureMask {
    pub const ALL: FeatureMask = FeatureMask(0b1111);

    pub fn from_bits(bits: u8) -> Result<Self> {
        if bits == 0 || bits > 0b1111 {
            return Err(Error::InvalidParameter(alloc::format!("feature mask {bits:#b}")));
        }
        Ok(FeatureMask(bits))
    }

    pub fn of(groups: &[FeatureGroup]) -> Result<Self> {
        Self::from_bits(groups.iter().fold(0, |m, g| m | g.bit()))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, g: FeatureGroup) -> bool {
        self.0 & g.bit() != 0
    }

    pub fn groups(self) -> impl Iterator<Item = FeatureGroup> {
        FeatureGroup::ALL.into_iter().filter(move |g| self.contains(*g))
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// All 15 nonempty masks, fewest groups first.
    pub fn all_nonempty() -> Vec<FeatureMask> {
        let mut masks: Vec<FeatureMask> = (1u8..16).map(FeatureMask).collect();
        masks.sort_by_key(|m| m.order_key());
        masks
    }

    /// Tie-break order: fewer groups first, then by bit pattern.
    pub fn order_key(self) -> (u32, u8) {
        (self.len(), self.0)
    }

    /// `frequency+ratio` style label.
    pub fn label(self) -> String {
        let mut out = String::new();
        for g in self.groups() {
            if !out.is_empty() {
                out.push('+');
            }
            out.push_str(g.name());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    /// POS tag inventory for the context tag histogram. Tags outside it go
    /// to one trailing bin.
    pub pos_inventory: Vec<String>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        let tags = [
            "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON", "PROPN", "PUNCT", "SCONJ",
            "SYM", "VERB", "X",
        ];
        FeatureConfig {
            pos_inventory: tags.iter().map(|t| String::from(*t)).collect(),
        }
    }
}

/// Pair features grouped as frequency (T1..T9), ratio (R1..R11), context
/// (C1, C2, C3 block, C4 block, C5 block) and PMI (A1..A5).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub pair: (EventKey, EventKey),
    pub frequency: [f64; 9],
    pub ratio: [f64; 11],
    pub context: Vec<f64>,
    pub pmi: [f64; 5],
}

impl FeatureVector {
    pub fn group(&self, g: FeatureGroup) -> &[f64] {
        match g {
            FeatureGroup::Frequency => &self.frequency,
            FeatureGroup::Ratio => &self.ratio,
            FeatureGroup::Context => &self.context,
            FeatureGroup::Pmi => &self.pmi,
        }
    }

    /// Concatenation of the groups enabled in `mask`, in group order.
    pub fn select(&self, mask: FeatureMask) -> Vec<f64> {
        mask.groups().flat_map(|g| self.group(g).iter().copied()).collect()
    }

    /// Same layout with every group outside `mask` zeroed.
    pub fn masked(&self, mask: FeatureMask) -> FeatureVector {
        let mut out = self.clone();
        if !mask.contains(FeatureGroup::Frequency) {
            out.frequency = [0.0; 9];
        }
        if !mask.contains(FeatureGroup::Ratio) {
            out.ratio = [0.0; 11];
        }
        if !mask.contains(FeatureGroup::Context) {
            out.context.iter_mut().for_each(|x| *x = 0.0);
        }
        if !mask.contains(FeatureGroup::Pmi) {
            out.pmi = [0.0; 5];
        }
        out
    }

    pub fn flat(&self) -> Vec<f64> {
        self.select(FeatureMask::ALL)
    }

    /// Column of A2 (pair PMI) inside `select(mask)`, if PMI is enabled.
    pub fn pair_pmi_column(&self, mask: FeatureMask) -> Option<usize> {
        if !mask.contains(FeatureGroup::Pmi) {
            return None;
        }
        let before: usize = mask
            .groups()
            .take_while(|g| *g != FeatureGroup::Pmi)
            .map(|g| self.group(g).len())
            .sum();
        Some(before + 1)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Builds every feature for `(a, b)`. `contexts` may include contexts of
/// other pairs; only those for this pair are used.
pub fn build_feature_vector(
    a: &EventKey,
    b: &EventKey,
    counts: &PairCounts,
    args: &ArgumentStats,
    contexts: &[CoOccurrenceContext],
    table: &EmbeddingTable,
    config: &FeatureConfig,
) -> Result<FeatureVector> {
    let t1 = counts.t1(a, b);
    if t1 == 0 {
        return Err(Error::UnknownPair(String::from(a.as_str()), String::from(b.as_str())));
    }
    let t = [
        t1,
        counts.t2(a, b),
        counts.t3(a, b),
        counts.freq(a),
        counts.freq(b),
        counts.verb_freq(a),
        counts.object_freq(a),
        counts.verb_freq(b),
        counts.object_freq(b),
    ];
    let frequency = t.map(|x| x as f64);
    let ratio = [
        ratio(t[1], t[0]),
        ratio(t[0], t[3]),
        ratio(t[0], t[4]),
        ratio(t[0], t[5]),
        ratio(t[0], t[6]),
        ratio(t[0], t[7]),
        ratio(t[0], t[8]),
        ratio(t[5], t[3]),
        ratio(t[6], t[3]),
        ratio(t[7], t[4]),
        ratio(t[8], t[4]),
    ];

    let dim = table.dim();
    let own: Vec<&CoOccurrenceContext> = contexts.iter().filter(|c| c.is_for(a, b)).collect();
    let c1 = own.len() as f64;
    let c2 = if own.is_empty() {
        0.0
    } else {
        own.iter().map(|c| c.lemmas.len()).sum::<usize>() as f64 / c1
    };
    let mut c3 = vec![0.0; dim];
    let mut in_vocab = 0usize;
    for lemma in own.iter().flat_map(|c| c.lemmas.iter()) {
        if let Some(v) = table.get(lemma) {
            c3.iter_mut().zip(v).for_each(|(acc, x)| *acc += x);
            in_vocab += 1;
        }
    }
    if in_vocab > 0 {
        c3.iter_mut().for_each(|x| *x /= in_vocab as f64);
    }
    let bins = config.pos_inventory.len() + 1;
    let mut c4 = vec![0.0; bins];
    let mut tagged = 0usize;
    for tag in own.iter().flat_map(|c| c.pos.iter()) {
        let bin = config.pos_inventory.iter().position(|t| t == tag).unwrap_or(bins - 1);
        c4[bin] += 1.0;
        tagged += 1;
    }
    if tagged > 0 {
        c4.iter_mut().for_each(|x| *x /= tagged as f64);
    }
    let mut context = Vec::with_capacity(2 + dim * 3 + bins);
    context.push(c1);
    context.push(c2);
    context.extend(c3);
    context.extend(c4);
    context.extend(embed_event(a, table).vec);
    context.extend(embed_event(b, table).vec);

    let n = counts.n_events();
    let pmi = [
        pmi(t[5], t[7], args.verb_verb(a.predicate(), b.predicate()), n),
        pmi(t[3], t[4], t1, n),
        pmi(t[5], t[8], args.verb_object(a.predicate(), b.object()), n),
        pmi(t[6], t[7], args.verb_object(b.predicate(), a.object()), n),
        pmi(t[6], t[8], args.object_object(a.object(), b.object()), n),
    ];

    Ok(FeatureVector {
        pair: (a.clone(), b.clone()),
        frequency,
        ratio,
        context,
        pmi,
    })
}
