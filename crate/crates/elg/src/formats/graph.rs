//! `ELG v1` graph files.
//!
//! ```text
//! ELG v1
//! meta    <count>       then <key> <value> rows
//! nodes   <count>       then <id> <canonical> <frequency> <surface forms> <vector|->
//! edges   <count>       then <src> <dst> <relation> <subtype|-> <support> <cooccurrence> <probability|-> <n> (<doc> <sent>)*
//! links   <count>       then <a> <b> <score>
//! checksum  sha256:<hex of every byte above this line>
//! ```
//!
//! Columns are tab-separated. A file is either loaded whole or rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use elg_core::graph::{EdgeSubtype, ElgGraph, EventNode, Relation, SimilarityLink, TypedEdge};
use elg_core::EventKey;
use sha2::{Digest, Sha256};

use super::{escape, fmt_f64, unescape, write_atomic};
use crate::error::{ElgError, Result};

pub const HEADER: &str = "ELG v1";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn body(graph: &ElgGraph) -> String {
    let mut out = format!("{HEADER}\n");
    let _ = writeln!(out, "meta\t{}", graph.meta.len());
    for (k, v) in &graph.meta {
        let _ = writeln!(out, "{}\t{}", escape(k), escape(v));
    }
    let _ = writeln!(out, "nodes\t{}", graph.nodes().len());
    for n in graph.nodes() {
        let forms: Vec<&str> = n.surface_forms.iter().map(EventKey::as_str).collect();
        let vector = match &n.vector {
            None => "-".to_string(),
            Some(v) => v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" "),
        };
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", n.node_id, n.canonical, n.frequency, forms.join(" "), vector);
    }
    let _ = writeln!(out, "edges\t{}", graph.edges().len());
    for e in graph.edges() {
        let _ = write!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            e.src,
            e.dst,
            e.relation,
            e.subtype.map_or("-", EdgeSubtype::name),
            e.support,
            e.cooccurrence,
            e.probability.map_or("-".to_string(), fmt_f64),
            e.evidence.len()
        );
        for (doc, sent) in &e.evidence {
            let _ = write!(out, "\t{}\t{sent}", escape(doc));
        }
        out.push('\n');
    }
    let _ = writeln!(out, "links\t{}", graph.similarity_links().len());
    for l in graph.similarity_links() {
        let _ = writeln!(out, "{}\t{}\t{}", l.a, l.b, fmt_f64(l.score));
    }
    out
}

pub fn serialize_graph(graph: &ElgGraph) -> String {
    let mut out = body(graph);
    let sum = sha256_hex(out.as_bytes());
    let _ = writeln!(out, "checksum\tsha256:{sum}");
    out
}

pub fn save_graph(graph: &ElgGraph, path: &Path) -> Result<()> {
    write_atomic(path, serialize_graph(graph).as_bytes())
}

/// Cursor over the body lines with section bookkeeping.
struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

fn corrupt(line: usize, msg: impl std::fmt::Display) -> ElgError {
    ElgError::Corrupt(format!("line {line}: {msg}"))
}

impl<'a> Reader<'a> {
    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        let (i, l) = self.lines.next().ok_or_else(|| ElgError::Corrupt("unexpected end of data".into()))?;
        Ok((i + 1, l.split('\t').collect()))
    }

    fn section(&mut self, name: &str) -> Result<usize> {
        let (line, c) = self.next()?;
        match c[..] {
            [n, count] if n == name => count.parse().map_err(|_| corrupt(line, format!("bad {name} count"))),
            _ => Err(corrupt(line, format!("expected `{name}` section"))),
        }
    }
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| corrupt(line, format!("bad number `{s}`")))
}

fn event_key(line: usize, s: &str) -> Result<EventKey> {
    EventKey::parse(s).map_err(|e| corrupt(line, e))
}

fn text(line: usize, s: &str) -> Result<String> {
    unescape(s).ok_or_else(|| corrupt(line, "bad escape"))
}

pub fn parse_graph(data: &str) -> Result<ElgGraph> {
    let first = data.lines().next().unwrap_or("");
    if first != HEADER {
        return Err(if first.starts_with("ELG ") { ElgError::Version(first.to_string()) } else { ElgError::Corrupt("missing `ELG v1` header".into()) });
    }
    let trailer_at = data.trim_end_matches('\n').rfind('\n').ok_or_else(|| ElgError::Corrupt("missing checksum".into()))? + 1;
    let (body, trailer) = data.split_at(trailer_at);
    let want = trailer
        .strip_suffix('\n')
        .and_then(|t| t.strip_prefix("checksum\tsha256:"))
        .ok_or_else(|| ElgError::Corrupt("missing or truncated checksum line".into()))?;
    if sha256_hex(body.as_bytes()) != want {
        return Err(ElgError::Corrupt("checksum mismatch".into()));
    }

    let mut r = Reader { lines: body.lines().enumerate() };
    r.next()?; // header
    let mut meta = BTreeMap::new();
    for _ in 0..r.section("meta")? {
        let (line, c) = r.next()?;
        let [k, v] = c[..] else { return Err(corrupt(line, "meta rows have 2 columns")) };
        meta.insert(text(line, k)?, text(line, v)?);
    }
    let mut nodes = Vec::new();
    for _ in 0..r.section("nodes")? {
        let (line, c) = r.next()?;
        let [id, canonical, freq, forms, vector] = c[..] else { return Err(corrupt(line, "node rows have 5 columns")) };
        let mut node = EventNode::new(num(line, id)?, event_key(line, canonical)?, num(line, freq)?);
        node.surface_forms = forms.split(' ').map(|f| event_key(line, f)).collect::<Result<BTreeSet<_>>>()?;
        node.vector = match vector {
            "-" => None,
            "" => Some(Vec::new()),
            v => Some(v.split(' ').map(|x| num(line, x)).collect::<Result<_>>()?),
        };
        nodes.push(node);
    }
    let mut edges = Vec::new();
    for _ in 0..r.section("edges")? {
        let (line, c) = r.next()?;
        if c.len() < 8 {
            return Err(corrupt(line, "edge rows have at least 8 columns"));
        }
        let relation = Relation::parse(c[2]).ok_or_else(|| corrupt(line, format!("unknown relation `{}`", c[2])))?;
        let mut e = TypedEdge::new(num(line, c[0])?, num(line, c[1])?, relation, num(line, c[4])?);
        e.subtype = match c[3] {
            "-" => None,
            s => Some(EdgeSubtype::parse(s).ok_or_else(|| corrupt(line, format!("unknown subtype `{s}`")))?),
        };
        e.cooccurrence = num(line, c[5])?;
        e.probability = match c[6] {
            "-" => None,
            p => Some(num(line, p)?),
        };
        let n_ev: usize = num(line, c[7])?;
        if c.len() != 8 + 2 * n_ev {
            return Err(corrupt(line, "evidence count does not match the row"));
        }
        for pair in c[8..].chunks(2) {
            e.evidence.push((text(line, pair[0])?, num(line, pair[1])?));
        }
        edges.push(e);
    }
    let mut links = Vec::new();
    for _ in 0..r.section("links")? {
        let (line, c) = r.next()?;
        let [a, b, score] = c[..] else { return Err(corrupt(line, "link rows have 3 columns")) };
        links.push(SimilarityLink { a: num(line, a)?, b: num(line, b)?, score: num(line, score)? });
    }
    if let Some((i, _)) = r.lines.next() {
        return Err(corrupt(i + 1, "trailing data after the links section"));
    }
    let graph = ElgGraph::from_parts(nodes, edges, links, meta).map_err(|e| ElgError::Corrupt(e.to_string()))?;
    // from_parts sorts; a file that was not written in canonical order is
    // still a valid graph, but the byte-exact contract needs canonical form
    if serialize_graph(&graph) != data {
        return Err(ElgError::Corrupt("rows are not in canonical order".into()));
    }
    Ok(graph)
}

pub fn load_graph(path: &Path) -> Result<ElgGraph> {
    let bytes = std::fs::read(path).map_err(ElgError::io(path))?;
    let data = String::from_utf8(bytes).map_err(|_| ElgError::Corrupt("not UTF-8".into()))?;
    parse_graph(&data)
}
