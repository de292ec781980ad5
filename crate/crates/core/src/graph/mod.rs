//! The event logic graph: event nodes, typed directed edges and similarity
//! links between events that were close but not merged.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::causality::CausalMention;
use crate::error::{Error, Result};
use crate::events::EventKey;
use crate::pairstats::{transition_probability, CoOccurrenceContext, PairCounts};
use crate::seqrel::Direction;

mod merge;
mod query;

pub use merge::{merge_similar_events, recompute_probabilities, MergeConfig, MergeOutcome, MergeReport};
pub use query::{neighbors, scc_index, strongly_connected_components, Neighborhood, NeighborhoodNode, NodeRole};

pub type NodeId = u32;

/// Evidence samples kept per edge.
pub const EVIDENCE_CAP: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct EventNode {
    pub node_id: NodeId,
    pub canonical: EventKey,
    pub surface_forms: BTreeSet<EventKey>,
    pub frequency: u64,
    pub vector: Option<Vec<f64>>,
}

impl EventNode {
    pub fn new(node_id: NodeId, canonical: EventKey, frequency: u64) -> Self {
        EventNode {
            node_id,
            surface_forms: BTreeSet::from([canonical.clone()]),
            canonical,
            frequency,
            vector: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    Sequential,
    Causal,
    Conditional,
    HypernymHyponym,
}

impl Relation {
    pub const ALL: [Relation; 4] = [Relation::Sequential, Relation::Causal, Relation::Conditional, Relation::HypernymHyponym];

    pub fn name(self) -> &'static str {
        match self {
            Relation::Sequential => "sequential",
            Relation::Causal => "causal",
            Relation::Conditional => "conditional",
            Relation::HypernymHyponym => "hypernym-hyponym",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.name() == s)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Flavor of a hypernym-hyponym edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeSubtype {
    Nounal,
    Verbal,
}

impl EdgeSubtype {
    pub fn name(self) -> &'static str {
        match self {
            EdgeSubtype::Nounal => "nounal",
            EdgeSubtype::Verbal => "verbal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [EdgeSubtype::Nounal, EdgeSubtype::Verbal].into_iter().find(|t| t.name() == s)
    }
}

/// `(doc_id, sent_index)` of a sentence supporting an edge.
pub type Evidence = (String, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct TypedEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub relation: Relation,
    pub subtype: Option<EdgeSubtype>,
    pub support: u64,
    /// Directed co-occurrence count `src` before `dst` (sequential only).
    pub cooccurrence: u64,
    pub probability: Option<f64>,
    pub evidence: Vec<Evidence>,
}

impl TypedEdge {
    pub fn new(src: NodeId, dst: NodeId, relation: Relation, support: u64) -> Self {
        TypedEdge {
            src,
            dst,
            relation,
            subtype: None,
            support,
            cooccurrence: 0,
            probability: None,
            evidence: Vec::new(),
        }
    }

    fn key(&self) -> (NodeId, NodeId, Relation) {
        (self.src, self.dst, self.relation)
    }

    /// Folds another edge with the same endpoints into this one.
    fn absorb(&mut self, other: TypedEdge) {
        self.support += other.support;
        self.cooccurrence += other.cooccurrence;
        self.subtype = self.subtype.or(other.subtype);
        self.evidence.extend(other.evidence);
        normalize_evidence(&mut self.evidence);
    }
}

pub(crate) fn normalize_evidence(ev: &mut Vec<Evidence>) {
    ev.sort();
    ev.dedup();
    ev.truncate(EVIDENCE_CAP);
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityLink {
    pub a: NodeId,
    pub b: NodeId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElgGraph {
    nodes: Vec<EventNode>,
    edges: Vec<TypedEdge>,
    links: Vec<SimilarityLink>,
    /// Thresholds, corpus hash and other build settings.
    pub meta: BTreeMap<String, String>,
    key_index: BTreeMap<EventKey, NodeId>,
    /// `edges[out_start[n]..out_start[n + 1]]` leave node `n`.
    out_start: Vec<usize>,
}

impl Default for ElgGraph {
    /// The empty graph, indexed the same way `from_parts` would index it.
    fn default() -> Self {
        ElgGraph {
            nodes: Vec::new(),
            edges: Vec::new(),
            links: Vec::new(),
            meta: BTreeMap::new(),
            key_index: BTreeMap::new(),
            out_start: alloc::vec![0],
        }
    }
}

impl ElgGraph {
    /// Checks every invariant and indexes the graph. Edges and links may
    /// come in any order.
    pub fn from_parts(nodes: Vec<EventNode>, mut edges: Vec<TypedEdge>, mut links: Vec<SimilarityLink>, meta: BTreeMap<String, String>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        let mut key_index = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if n.node_id as usize != i {
                return bad(format!("node ids not dense at position {i}"));
            }
            if !n.surface_forms.contains(&n.canonical) {
                return bad(format!("node {i} canonical key missing from its surface forms"));
            }
            for k in &n.surface_forms {
                if key_index.insert(k.clone(), n.node_id).is_some() {
                    return bad(format!("event {k} belongs to two nodes"));
                }
            }
        }
        let n = nodes.len() as u64;
        edges.sort_by(|a, b| a.key().cmp(&b.key()));
        for w in edges.windows(2) {
            if w[0].key() == w[1].key() {
                return bad(format!("duplicate {} edge {} -> {}", w[0].relation, w[0].src, w[0].dst));
            }
        }
        for e in &edges {
            if u64::from(e.src) >= n || u64::from(e.dst) >= n {
                return Err(Error::UnknownNode(e.src.max(e.dst)));
            }
            if e.src == e.dst {
                return bad(format!("self-loop on node {}", e.src));
            }
            if e.support == 0 {
                return bad(format!("edge {} -> {} has zero support", e.src, e.dst));
            }
            let ok_prob = match (e.relation, e.probability) {
                (Relation::Sequential, Some(p)) => (0.0..=1.0).contains(&p),
                (Relation::Sequential, None) => false,
                (_, p) => p.is_none(),
            };
            if !ok_prob {
                return bad(format!("edge {} -> {} has an invalid probability", e.src, e.dst));
            }
            if e.evidence.len() > EVIDENCE_CAP {
                return bad(format!("edge {} -> {} carries too much evidence", e.src, e.dst));
            }
        }
        for l in &mut links {
            if l.a > l.b {
                core::mem::swap(&mut l.a, &mut l.b);
            }
            if u64::from(l.b) >= n || l.a == l.b || !l.score.is_finite() {
                return bad(format!("invalid similarity link {} - {}", l.a, l.b));
            }
        }
        links.sort_by(|x, y| (x.a, x.b).cmp(&(y.a, y.b)));
        if links.windows(2).any(|w| (w[0].a, w[0].b) == (w[1].a, w[1].b)) {
            return bad("duplicate similarity link".into());
        }
        let mut out_start = Vec::with_capacity(nodes.len() + 1);
        let mut at = 0;
        for id in 0..nodes.len() as NodeId {
            out_start.push(at);
            while at < edges.len() && edges[at].src == id {
                at += 1;
            }
        }
        out_start.push(edges.len());
        Ok(ElgGraph {
            nodes,
            edges,
            links,
            meta,
            key_index,
            out_start,
        })
    }

    pub fn nodes(&self) -> &[EventNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[TypedEdge] {
        &self.edges
    }

    pub fn similarity_links(&self) -> &[SimilarityLink] {
        &self.links
    }

    pub fn node(&self, id: NodeId) -> Result<&EventNode> {
        self.nodes.get(id as usize).ok_or(Error::UnknownNode(id))
    }

    /// Node holding `key` as its canonical key or a merged surface form.
    pub fn resolve(&self, key: &EventKey) -> Option<NodeId> {
        self.key_index.get(key).copied()
    }

    pub fn out_edges(&self, id: NodeId) -> &[TypedEdge] {
        let i = id as usize;
        match (self.out_start.get(i), self.out_start.get(i + 1)) {
            (Some(&a), Some(&b)) => &self.edges[a..b],
            _ => &[],
        }
    }

    pub fn edge(&self, src: NodeId, dst: NodeId, relation: Relation) -> Option<&TypedEdge> {
        let out = self.out_edges(src);
        out.binary_search_by(|e| (e.dst, e.relation).cmp(&(dst, relation))).ok().map(|i| &out[i])
    }

    /// Similarity links touching `id`, as `(other, score)`.
    pub fn links_of(&self, id: NodeId) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.links.iter().filter_map(move |l| {
            if l.a == id {
                Some((l.b, l.score))
            } else if l.b == id {
                Some((l.a, l.score))
            } else {
                None
            }
        })
    }

    /// Adds a curated edge, accumulating into an existing edge with the same
    /// endpoints and relation.
    pub fn add_edge(&mut self, edge: TypedEdge) -> Result<()> {
        let mut edges = core::mem::take(&mut self.edges);
        match edges.iter_mut().find(|e| e.key() == edge.key()) {
            Some(e) => e.absorb(edge),
            None => edges.push(edge),
        }
        let nodes = core::mem::take(&mut self.nodes);
        let links = core::mem::take(&mut self.links);
        let meta = core::mem::take(&mut self.meta);
        *self = ElgGraph::from_parts(nodes, edges, links, meta)?;
        Ok(())
    }

    pub fn total_frequency(&self) -> u64 {
        self.nodes.iter().map(|n| n.frequency).sum()
    }

    pub fn total_support(&self) -> u64 {
        self.edges.iter().map(|e| e.support).sum()
    }
}

/// A positive sequential pair and its classified direction. `Forward`
/// means `a` happens before `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifiedPair {
    pub a: EventKey,
    pub b: EventKey,
    pub direction: Direction,
}

/// Assembles the unmerged graph: one node per event key, sequential edges
/// weighted by transition probability and causal edges from mentions.
pub fn build_graph(pairs: &[ClassifiedPair], mentions: &[CausalMention], counts: &PairCounts, contexts: &[CoOccurrenceContext]) -> Result<ElgGraph> {
    let mut keys: BTreeSet<EventKey> = counts.events().keys().cloned().collect();
    for p in pairs {
        if counts.t1(&p.a, &p.b) == 0 {
            return Err(Error::UnknownPair(p.a.as_str().into(), p.b.as_str().into()));
        }
    }
    for m in mentions {
        if let (Some(c), Some(e)) = (&m.cause_event, &m.effect_event) {
            keys.insert(c.clone());
            keys.insert(e.clone());
        }
    }
    let ids: BTreeMap<&EventKey, NodeId> = keys.iter().enumerate().map(|(i, k)| (k, i as NodeId)).collect();
    let nodes: Vec<EventNode> = keys.iter().enumerate().map(|(i, k)| EventNode::new(i as NodeId, k.clone(), counts.freq(k))).collect();

    let mut edges: BTreeMap<(NodeId, NodeId, Relation), TypedEdge> = BTreeMap::new();
    let mut add = |edge: TypedEdge| match edges.get_mut(&edge.key()) {
        Some(e) => e.absorb(edge),
        None => {
            edges.insert(edge.key(), edge);
        }
    };
    for p in pairs {
        let (src, dst) = match p.direction {
            Direction::Forward => (&p.a, &p.b),
            Direction::Backward => (&p.b, &p.a),
        };
        if src == dst {
            continue;
        }
        let mut e = TypedEdge::new(ids[src], ids[dst], Relation::Sequential, counts.t1(src, dst));
        e.cooccurrence = counts.t2(src, dst);
        e.probability = Some(transition_probability(src, dst, counts)?);
        e.evidence = contexts.iter().filter(|c| c.is_for(src, dst)).map(|c| (c.doc_id.clone(), c.first_sentence)).collect();
        normalize_evidence(&mut e.evidence);
        add(e);
    }
    for m in mentions {
        let (Some(c), Some(e)) = (&m.cause_event, &m.effect_event) else { continue };
        if c == e {
            continue;
        }
        let mut edge = TypedEdge::new(ids[c], ids[e], Relation::Causal, 1);
        edge.evidence.push((m.doc_id.clone(), m.sent_index));
        add(edge);
    }
    ElgGraph::from_parts(nodes, edges.into_values().collect(), Vec::new(), BTreeMap::new())
}


#[cfg(test)]
mod tests {
    use super::fixtures::key;
    use super::*;
    use crate::events::TokenSpan;
    use crate::pairstats::{count_pairs, DocumentEvents};
    use alloc::vec;

    fn mention(c: &str, e: &str, sent: usize) -> CausalMention {
        CausalMention {
            doc_id: "d".into(),
            sent_index: sent,
            cause: TokenSpan::new(0, 0),
            effect: TokenSpan::new(2, 2),
            rule_id: "r".into(),
            cause_event: Some(key(c)),
            effect_event: Some(key(e)),
        }
    }

    #[test]
    fn sequential_edge_probability() {
        // a occurs 6 times, followed by b three times
        let chain: Vec<EventKey> = ["a", "b", "a", "b", "a", "b", "a", "c", "a", "c", "a", "c"].iter().map(|s| key(s)).collect();
        let counts = count_pairs(&[DocumentEvents::from_chain("d", &chain)], 1);
        assert_eq!((counts.t2(&key("a"), &key("b")), counts.freq(&key("a"))), (3, 6));
        let pairs = vec![ClassifiedPair {
            a: key("a"),
            b: key("b"),
            direction: Direction::Forward,
        }];
        let g = build_graph(&pairs, &[], &counts, &[]).unwrap();
        let (a, b) = (g.resolve(&key("a")).unwrap(), g.resolve(&key("b")).unwrap());
        let e = g.edge(a, b, Relation::Sequential).unwrap();
        assert_eq!(e.probability, Some(0.5));
        assert!(g.edge(b, a, Relation::Sequential).is_none());
    }

    #[test]
    fn causal_dedup_and_empty() {
        let g = build_graph(&[], &[mention("rain", "flood", 0), mention("rain", "flood", 3), mention("x", "x", 1)], &PairCounts::default(), &[]).unwrap();
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.edges()[0].support, 2);
        assert_eq!(g.edges()[0].evidence, vec![("d".into(), 0), ("d".into(), 3)]);
        let empty = build_graph(&[], &[], &PairCounts::default(), &[]).unwrap();
        assert!(empty.nodes().is_empty() && empty.edges().is_empty());
    }

    #[test]
    fn unknown_pair_is_an_error() {
        let pairs = vec![ClassifiedPair {
            a: key("a"),
            b: key("b"),
            direction: Direction::Backward,
        }];
        assert!(matches!(build_graph(&pairs, &[], &PairCounts::default(), &[]), Err(Error::UnknownPair(..))));
    }

    #[test]
    fn from_parts_rejects_broken_graphs() {
        let g = fixtures::graph(3, &[(0, 1, 0.5)]);
        let nodes = g.nodes().to_vec();
        let mut loop_edge = TypedEdge::new(1, 1, Relation::Causal, 1);
        assert!(ElgGraph::from_parts(nodes.clone(), vec![loop_edge.clone()], vec![], BTreeMap::new()).is_err());
        loop_edge.dst = 7;
        assert!(ElgGraph::from_parts(nodes.clone(), vec![loop_edge], vec![], BTreeMap::new()).is_err());
        let no_prob = TypedEdge::new(0, 1, Relation::Sequential, 1);
        assert!(ElgGraph::from_parts(nodes.clone(), vec![no_prob], vec![], BTreeMap::new()).is_err());
        let mut causal_prob = TypedEdge::new(0, 1, Relation::Causal, 1);
        causal_prob.probability = Some(0.3);
        assert!(ElgGraph::from_parts(nodes, vec![causal_prob], vec![], BTreeMap::new()).is_err());
    }

    #[test]
    fn curated_edges_accumulate() {
        let mut g = fixtures::graph(3, &[(0, 1, 0.5)]);
        let mut e = TypedEdge::new(2, 0, Relation::HypernymHyponym, 1);
        e.subtype = Some(EdgeSubtype::Nounal);
        g.add_edge(e.clone()).unwrap();
        g.add_edge(e).unwrap();
        g.add_edge(TypedEdge::new(1, 2, Relation::Conditional, 1)).unwrap();
        assert_eq!(g.edge(2, 0, Relation::HypernymHyponym).unwrap().support, 2);
        assert_eq!(g.out_edges(1).len(), 1);
        assert_eq!(g.out_edges(0).len(), 1);
    }
}
