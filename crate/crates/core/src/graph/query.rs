//! Neighborhood expansion and strongly connected components.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{ElgGraph, NodeId, Relation, SimilarityLink, TypedEdge};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeRole {
    Seed,
    /// Reached along a directed edge.
    Evolution,
    /// Reached only through a similarity link.
    Similar,
}

impl NodeRole {
    pub fn name(self) -> &'static str {
        match self {
            NodeRole::Seed => "seed",
            NodeRole::Evolution => "evolution",
            NodeRole::Similar => "similar",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborhoodNode {
    pub node_id: NodeId,
    pub role: NodeRole,
    pub hop: usize,
}

/// Subgraph reached from a seed. Nodes are in discovery order.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub nodes: Vec<NeighborhoodNode>,
    pub edges: Vec<TypedEdge>,
    pub links: Vec<SimilarityLink>,
}

/// Edge ranking inside one hop: probability desc, support desc, target id.
fn edge_order(a: &TypedEdge, b: &TypedEdge) -> Ordering {
    let p = |e: &TypedEdge| e.probability.unwrap_or(-1.0);
    p(b).total_cmp(&p(a)).then(b.support.cmp(&a.support)).then(a.dst.cmp(&b.dst)).then(a.relation.cmp(&b.relation))
}

/// Breadth-first expansion over outgoing edges (optionally of one
/// relation) and, if asked, similarity links. `top_k` caps the edges kept
/// per expanded node.
pub fn neighbors(graph: &ElgGraph, seed: NodeId, relation: Option<Relation>, depth: usize, include_links: bool, top_k: Option<usize>) -> Result<Neighborhood> {
    graph.node(seed)?;
    if depth == 0 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    let mut seen: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut out = Neighborhood {
        nodes: vec![NeighborhoodNode {
            node_id: seed,
            role: NodeRole::Seed,
            hop: 0,
        }],
        edges: Vec::new(),
        links: Vec::new(),
    };
    seen.insert(seed, 0);
    let mut frontier = vec![seed];
    for hop in 1..=depth {
        let mut next = Vec::new();
        for &n in &frontier {
            let mut edges: Vec<&TypedEdge> = graph.out_edges(n).iter().filter(|e| relation.is_none_or(|r| e.relation == r)).collect();
            edges.sort_by(|a, b| edge_order(a, b));
            if let Some(k) = top_k {
                edges.truncate(k);
            }
            for e in edges {
                out.edges.push(e.clone());
                if !seen.contains_key(&e.dst) {
                    seen.insert(e.dst, out.nodes.len());
                    out.nodes.push(NeighborhoodNode {
                        node_id: e.dst,
                        role: NodeRole::Evolution,
                        hop,
                    });
                    next.push(e.dst);
                }
            }
            if include_links {
                let mut links: Vec<(NodeId, f64)> = graph.links_of(n).collect();
                links.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                if let Some(k) = top_k {
                    links.truncate(k);
                }
                for (other, score) in links {
                    let (a, b) = if n < other { (n, other) } else { (other, n) };
                    if !out.links.iter().any(|l| l.a == a && l.b == b) {
                        out.links.push(SimilarityLink { a, b, score });
                    }
                    if !seen.contains_key(&other) {
                        seen.insert(other, out.nodes.len());
                        out.nodes.push(NeighborhoodNode {
                            node_id: other,
                            role: NodeRole::Similar,
                            hop,
                        });
                        next.push(other);
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(out)
}

/// Component index per node (iterative Tarjan). Components are numbered in
/// order of their smallest node id.
pub fn scc_index(graph: &ElgGraph, relation: Option<Relation>) -> Vec<usize> {
    let n = graph.nodes().len();
    let succ = |v: usize| -> Vec<usize> {
        graph.out_edges(v as NodeId).iter().filter(|e| relation.is_none_or(|r| e.relation == r)).map(|e| e.dst as usize).collect()
    };
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![UNSEEN; n];
    let mut n_comp = 0;
    let mut counter = 0;
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        let mut call: Vec<(usize, Vec<usize>, usize)> = vec![(root, succ(root), 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some((v, ws, i)) = call.last_mut() {
            let v = *v;
            if *i < ws.len() {
                let w = ws[*i];
                *i += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, succ(w), 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some((parent, _, _)) = call.last() {
                low[*parent] = low[*parent].min(low[v]);
            }
            if low[v] == index[v] {
                while let Some(w) = stack.pop() {
                    on_stack[w] = false;
                    comp[w] = n_comp;
                    if w == v {
                        break;
                    }
                }
                n_comp += 1;
            }
        }
    }
    // renumber by smallest member
    let mut first: BTreeMap<usize, usize> = BTreeMap::new();
    for (v, &c) in comp.iter().enumerate() {
        first.entry(c).or_insert(v);
    }
    let mut order: Vec<(usize, usize)> = first.into_iter().map(|(c, v)| (v, c)).collect();
    order.sort_unstable();
    let mut renum = vec![0; n_comp];
    for (new, (_, old)) in order.into_iter().enumerate() {
        renum[old] = new;
    }
    comp.into_iter().map(|c| renum[c]).collect()
}

/// Components as sorted node lists, singletons included, ordered by their
/// smallest member.
pub fn strongly_connected_components(graph: &ElgGraph, relation: Option<Relation>) -> Vec<Vec<NodeId>> {
    let idx = scc_index(graph, relation);
    let mut comps: Vec<Vec<NodeId>> = vec![Vec::new(); idx.iter().max().map_or(0, |m| m + 1)];
    for (v, c) in idx.into_iter().enumerate() {
        comps[c].push(v as NodeId);
    }
    comps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::graph;
    use crate::graph::EventNode;
    use proptest::prelude::*;

    fn ids(n: &Neighborhood) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = n.nodes.iter().map(|x| x.node_id).collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn star_and_chain() {
        let star = graph(5, &[(0, 1, 0.1), (0, 2, 0.4), (0, 3, 0.4), (0, 4, 0.2)]);
        let n = neighbors(&star, 0, None, 1, false, None).unwrap();
        assert_eq!(ids(&n), vec![0, 1, 2, 3, 4]);
        let order: Vec<NodeId> = n.nodes.iter().map(|x| x.node_id).collect();
        assert_eq!(order, vec![0, 2, 3, 4, 1]);
        let top = neighbors(&star, 0, None, 1, false, Some(2)).unwrap();
        assert_eq!(ids(&top), vec![0, 2, 3]);

        let chain = graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        assert_eq!(ids(&neighbors(&chain, 0, None, 2, false, None).unwrap()), vec![0, 1, 2]);
        assert_eq!(ids(&neighbors(&chain, 0, None, 1, false, None).unwrap()), vec![0, 1]);
        let only = neighbors(&chain, 0, Some(Relation::Causal), 3, false, None).unwrap();
        assert_eq!(ids(&only), vec![0]);
        assert!(matches!(neighbors(&chain, 9, None, 1, false, None), Err(Error::UnknownNode(9))));
        assert!(neighbors(&chain, 0, None, 0, false, None).is_err());
    }

    #[test]
    fn links_give_similar_role() {
        let g = graph(3, &[(0, 1, 0.5)]);
        let g = ElgGraph::from_parts(g.nodes().to_vec(), g.edges().to_vec(), vec![SimilarityLink { a: 2, b: 0, score: 0.7 }], Default::default()).unwrap();
        let n = neighbors(&g, 0, None, 1, true, None).unwrap();
        assert_eq!(n.nodes.iter().find(|x| x.node_id == 2).unwrap().role, NodeRole::Similar);
        assert_eq!(neighbors(&g, 0, None, 1, false, None).unwrap().nodes.len(), 2);
    }

    #[test]
    fn cycle_and_dag() {
        let g = graph(5, &[(0, 1, 0.5), (1, 2, 0.5), (2, 3, 0.5), (3, 1, 0.5), (3, 4, 0.5)]);
        assert_eq!(strongly_connected_components(&g, None), vec![vec![0], vec![1, 2, 3], vec![4]]);
        let dag = graph(4, &[(0, 1, 0.5), (1, 2, 0.5), (0, 3, 0.5)]);
        assert_eq!(strongly_connected_components(&dag, None).len(), 4);
        let empty = ElgGraph::from_parts(Vec::<EventNode>::new(), vec![], vec![], Default::default()).unwrap();
        assert!(strongly_connected_components(&empty, None).is_empty());
    }

    /// Reachability matrix by a plain search from every node.
    fn reach(n: usize, edges: &[(NodeId, NodeId, f64)]) -> Vec<Vec<bool>> {
        (0..n)
            .map(|start| {
                let mut seen = vec![false; n];
                let mut todo = vec![start];
                seen[start] = true;
                while let Some(v) = todo.pop() {
                    for &(s, d, _) in edges {
                        if s as usize == v && !seen[d as usize] {
                            seen[d as usize] = true;
                            todo.push(d as usize);
                        }
                    }
                }
                seen
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(30))]
        #[test]
        fn scc_matches_reachability(raw in proptest::collection::btree_set((0u32..50, 0u32..50), 0..120)) {
            let edges: Vec<(NodeId, NodeId, f64)> = raw.into_iter().filter(|(a, b)| a != b).map(|(a, b)| (a, b, 0.5)).collect();
            let g = graph(50, &edges);
            let idx = scc_index(&g, None);
            let r = reach(50, &edges);
            for i in 0..50 {
                for j in 0..50 {
                    prop_assert_eq!(idx[i] == idx[j], r[i][j] && r[j][i]);
                }
            }
        }
    }
}
