//! Generalization: events whose vectors are close enough collapse into one
//! node; moderately close ones are linked.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{normalize_evidence, ElgGraph, EventNode, NodeId, Relation, SimilarityLink, TypedEdge};
use crate::embeddings::{cosine, VectorSource};
use crate::error::{Error, Result};
use crate::events::EventKey;
use crate::pairstats::PairCounts;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeConfig {
    pub tau_merge: f64,
    pub tau_link: f64,
    /// Warn when more than this fraction of nodes has no vector.
    pub max_missing_fraction: f64,
}

impl Default for MergeConfig {
    fn default() -> Self {
        MergeConfig {
            tau_merge: 0.85,
            tau_link: 0.6,
            max_missing_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MergeReport {
    /// Clusters with more than one member.
    pub merged_clusters: usize,
    pub nodes_before: usize,
    pub nodes_after: usize,
    pub dropped_self_loops: usize,
    pub dropped_self_loop_support: u64,
    pub missing_vectors: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    pub graph: ElgGraph,
    /// Every surface form mapped to its node's canonical key.
    pub key_map: BTreeMap<EventKey, EventKey>,
    pub report: MergeReport,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Index pairs `(i, j)`, `i < j`, whose canonical keys share a lemma.
fn blocked_pairs(keys: &[&EventKey]) -> BTreeSet<(usize, usize)> {
    let mut blocks: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        let lemmas: BTreeSet<&str> = k.lemmas().filter(|l| !l.is_empty()).collect();
        for l in lemmas {
            blocks.entry(l).or_default().push(i);
        }
    }
    let mut pairs = BTreeSet::new();
    for members in blocks.values() {
        for (x, &i) in members.iter().enumerate() {
            for &j in &members[x + 1..] {
                pairs.insert((i, j));
            }
        }
    }
    pairs
}

fn similarity(vecs: &[Option<Vec<f64>>], i: usize, j: usize) -> Result<Option<f64>> {
    match (&vecs[i], &vecs[j]) {
        (Some(u), Some(v)) => cosine(u, v).map(Some),
        _ => Ok(None),
    }
}

/// Merges nodes connected by cosine ≥ `tau_merge` (transitively) among
/// lemma-sharing candidates, then links surviving nodes scoring in
/// `[tau_link, tau_merge)`.
///
/// Sequential probabilities on merged edges are estimated from summed
/// co-occurrence over summed frequency; [`recompute_probabilities`] replaces
/// them with exact values from a recount.
pub fn merge_similar_events(graph: &ElgGraph, vectors: &dyn VectorSource, config: &MergeConfig) -> Result<MergeOutcome> {
    if !(config.tau_link > 0.0 && config.tau_link <= config.tau_merge && config.tau_merge <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < tau_link <= tau_merge <= 1, got {} and {}",
            config.tau_link, config.tau_merge
        )));
    }
    let old = graph.nodes();
    let mut report = MergeReport {
        nodes_before: old.len(),
        ..MergeReport::default()
    };
    let vecs: Vec<Option<Vec<f64>>> = old.iter().map(|n| vectors.event_vector(&n.canonical).or_else(|| n.vector.clone())).collect();
    report.missing_vectors = vecs.iter().filter(|v| v.is_none()).count();
    if !old.is_empty() && report.missing_vectors as f64 > config.max_missing_fraction * old.len() as f64 {
        report.warnings.push(format!("{} of {} events have no vector and stay unmerged", report.missing_vectors, old.len()));
    }

    let mut uf = UnionFind((0..old.len()).collect());
    let keys: Vec<&EventKey> = old.iter().map(|n| &n.canonical).collect();
    for (i, j) in blocked_pairs(&keys) {
        if similarity(&vecs, i, j)?.is_some_and(|s| s >= config.tau_merge) {
            uf.union(i, j);
        }
    }
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..old.len() {
        clusters.entry(uf.find(i)).or_default().push(i);
    }

    // canonical member per cluster, then new ids in canonical-key order
    let mut groups: Vec<(usize, Vec<usize>)> = clusters
        .into_values()
        .map(|members| {
            let canon = *members
                .iter()
                .max_by(|&&a, &&b| old[a].frequency.cmp(&old[b].frequency).then_with(|| old[b].canonical.cmp(&old[a].canonical)))
                .expect("clusters are nonempty");
            (canon, members)
        })
        .collect();
    groups.sort_by(|a, b| old[a.0].canonical.cmp(&old[b.0].canonical));
    report.merged_clusters = groups.iter().filter(|g| g.1.len() > 1).count();

    let mut new_id = alloc::vec![0 as NodeId; old.len()];
    let mut singleton = alloc::vec![true; old.len()];
    let mut nodes = Vec::with_capacity(groups.len());
    let mut key_map = BTreeMap::new();
    for (id, (canon, members)) in groups.iter().enumerate() {
        let mut node = EventNode::new(id as NodeId, old[*canon].canonical.clone(), 0);
        for &m in members {
            new_id[m] = id as NodeId;
            singleton[m] = members.len() == 1;
            node.frequency += old[m].frequency;
            node.surface_forms.extend(old[m].surface_forms.iter().cloned());
        }
        node.vector = vecs[*canon].clone();
        for k in &node.surface_forms {
            key_map.insert(k.clone(), node.canonical.clone());
        }
        nodes.push(node);
    }
    report.nodes_after = nodes.len();

    let mut edges: BTreeMap<(NodeId, NodeId, Relation), (TypedEdge, bool)> = BTreeMap::new();
    for e in graph.edges() {
        let (src, dst) = (new_id[e.src as usize], new_id[e.dst as usize]);
        if src == dst {
            report.dropped_self_loops += 1;
            report.dropped_self_loop_support += e.support;
            continue;
        }
        let touched = !(singleton[e.src as usize] && singleton[e.dst as usize]);
        let moved = TypedEdge { src, dst, ..e.clone() };
        match edges.get_mut(&(src, dst, e.relation)) {
            Some((acc, t)) => {
                acc.absorb(moved);
                *t = true;
            }
            None => {
                edges.insert((src, dst, e.relation), (moved, touched));
            }
        }
    }
    let edges: Vec<TypedEdge> = edges
        .into_values()
        .map(|(mut e, touched)| {
            if touched && e.relation == Relation::Sequential {
                let f = nodes[e.src as usize].frequency;
                e.probability = Some(if f == 0 { 0.0 } else { (e.cooccurrence as f64 / f as f64).min(1.0) });
            }
            normalize_evidence(&mut e.evidence);
            e
        })
        .collect();

    let new_vecs: Vec<Option<Vec<f64>>> = nodes.iter().map(|n| n.vector.clone()).collect();
    let new_keys: Vec<&EventKey> = nodes.iter().map(|n| &n.canonical).collect();
    let mut links = Vec::new();
    for (i, j) in blocked_pairs(&new_keys) {
        if let Some(s) = similarity(&new_vecs, i, j)? {
            if s >= config.tau_link && s < config.tau_merge {
                links.push(SimilarityLink {
                    a: i as NodeId,
                    b: j as NodeId,
                    score: s,
                });
            }
        }
    }

    let mut meta = graph.meta.clone();
    meta.insert("tau_merge".into(), format!("{}", config.tau_merge));
    meta.insert("tau_link".into(), format!("{}", config.tau_link));
    for w in &report.warnings {
        log::warn!("{w}");
    }
    Ok(MergeOutcome {
        graph: ElgGraph::from_parts(nodes, edges, links, meta)?,
        key_map,
        report,
    })
}

/// Exact sequential probabilities and co-occurrence counts from counts over
/// canonical keys (occurrences relabeled with the merge key map).
pub fn recompute_probabilities(graph: &ElgGraph, counts: &PairCounts) -> Result<ElgGraph> {
    let key = |id: NodeId| &graph.nodes()[id as usize].canonical;
    let edges = graph
        .edges()
        .iter()
        .map(|e| {
            let mut e = e.clone();
            if e.relation == Relation::Sequential {
                let (s, d) = (key(e.src), key(e.dst));
                e.cooccurrence = counts.t2(s, d);
                let f = counts.freq(s);
                e.probability = Some(if f == 0 { 0.0 } else { e.cooccurrence as f64 / f as f64 });
            }
            e
        })
        .collect();
    ElgGraph::from_parts(graph.nodes().to_vec(), edges, graph.similarity_links().to_vec(), graph.meta.clone())
}
