//! Read-only HTTP query API over a loaded graph.
//!
//! Handlers are plain functions from a [`Loaded`] graph and query
//! parameters to a JSON value; the axum layer only parses parameters and
//! maps errors to status codes.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use elg_core::graph::{neighbors, ElgGraph, NodeId, Relation};
use elg_core::EventKey;
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::config::ServiceSection;
use crate::error::{ElgError, Result};
use crate::formats::graph::{load_graph, serialize_graph, sha256_hex};
use crate::formats::read_text;
use crate::formats::tables::{parse_sentences, SentenceTexts};

/// Limits applied to every request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_depth: usize,
    pub node_cap: usize,
    pub search_limit: usize,
}

impl From<&ServiceSection> for Limits {
    fn from(s: &ServiceSection) -> Self {
        Limits { max_depth: s.max_depth, node_cap: s.node_cap, search_limit: s.search_limit }
    }
}

/// A graph together with the sentence text its evidence points at.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub graph: ElgGraph,
    pub sentences: SentenceTexts,
    pub source: PathBuf,
    pub sha256: String,
}

impl Loaded {
    pub fn new(graph: ElgGraph, sentences: SentenceTexts, source: PathBuf) -> Self {
        let sha256 = sha256_hex(serialize_graph(&graph).as_bytes());
        Loaded { graph, sentences, source, sha256 }
    }

    /// Loads a graph file and the sentence sidecar named in its meta.
    pub fn from_file(path: &Path) -> Result<Self> {
        let graph = load_graph(path)?;
        let sentences = match graph.meta.get("sentences") {
            Some(name) => {
                let p = path.parent().unwrap_or(Path::new(".")).join(name);
                if p.exists() {
                    parse_sentences(&read_text(&p)?, &p)?
                } else {
                    log::warn!("sentence file {} not found; contexts will have no text", p.display());
                    SentenceTexts::new()
                }
            }
            None => SentenceTexts::new(),
        };
        Ok(Loaded::new(graph, sentences, path.to_path_buf()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ApiError {
    BadRequest(String),
    NotFound(String),
    Unavailable,
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Unavailable => StatusCode::SERVICE_UNAVAILABLE,
        }
    }

    fn body(&self) -> Value {
        let msg = match self {
            ApiError::BadRequest(m) | ApiError::NotFound(m) => m.as_str(),
            ApiError::Unavailable => "no graph loaded",
        };
        json!({ "error": msg })
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}

pub type ApiResult = std::result::Result<Value, ApiError>;

fn node_json(g: &ElgGraph, id: NodeId, role: Option<&str>) -> Value {
    let n = &g.nodes()[id as usize];
    let mut v = json!({
        "node_id": n.node_id,
        "canonical": n.canonical.as_str(),
        "frequency": n.frequency,
        "surface_forms": n.surface_forms.iter().map(EventKey::as_str).collect::<Vec<_>>(),
    });
    if let Some(r) = role {
        v["role"] = json!(r);
    }
    v
}

fn parse_relation(s: Option<&str>) -> std::result::Result<Option<Relation>, ApiError> {
    match s {
        None | Some("") => Ok(None),
        Some(r) => Relation::parse(r).map(Some).ok_or_else(|| ApiError::BadRequest(format!("unknown relation `{r}`"))),
    }
}

pub fn health(loaded: Option<&Loaded>) -> ApiResult {
    let l = loaded.ok_or(ApiError::Unavailable)?;
    Ok(json!({
        "status": "ok",
        "nodes": l.graph.nodes().len(),
        "edges": l.graph.edges().len(),
        "links": l.graph.similarity_links().len(),
        "sha256": l.sha256,
        "meta": l.graph.meta,
    }))
}

/// Substring match over canonical keys and surface forms, or an exact
/// lemma match on a key slot. Exact key hits come first, then frequency.
pub fn search(l: &Loaded, q: &str, limit: Option<usize>, limits: &Limits) -> ApiResult {
    let q = q.trim().to_lowercase();
    if q.is_empty() {
        return Err(ApiError::BadRequest("query `q` must not be empty".into()));
    }
    let limit = limit.unwrap_or(limits.search_limit);
    if limit == 0 {
        return Err(ApiError::BadRequest("limit must be at least 1".into()));
    }
    let limit = limit.min(limits.search_limit);
    let key_matches = |k: &EventKey| {
        let s = k.as_str().to_lowercase();
        s.contains(&q) || k.lemmas().any(|w| w.to_lowercase() == q)
    };
    let mut hits: Vec<(u8, u64, NodeId)> = l
        .graph
        .nodes()
        .iter()
        .filter(|n| n.surface_forms.iter().any(key_matches) || key_matches(&n.canonical))
        .map(|n| {
            let rank = if n.canonical.as_str().to_lowercase() == q {
                0
            } else if n.surface_forms.iter().any(|f| f.as_str().to_lowercase() == q) {
                1
            } else {
                2
            };
            (rank, n.frequency, n.node_id)
        })
        .collect();
    hits.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
    hits.truncate(limit);
    let nodes: Vec<Value> = hits.iter().map(|h| node_json(&l.graph, h.2, None)).collect();
    Ok(json!({ "query": q, "nodes": nodes }))
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct NeighborParams {
    pub relation: Option<String>,
    pub depth: Option<usize>,
    pub top_k: Option<usize>,
    pub links: Option<bool>,
}

/// The neighborhood of `id`, cut to the node cap. Edges and links whose
/// endpoints were cut are dropped with them.
pub fn neighborhood(l: &Loaded, id: NodeId, p: &NeighborParams, limits: &Limits) -> ApiResult {
    let g = &l.graph;
    if g.node(id).is_err() {
        return Err(ApiError::NotFound(format!("unknown node {id}")));
    }
    let depth = p.depth.unwrap_or(1);
    if depth == 0 || depth > limits.max_depth {
        return Err(ApiError::BadRequest(format!("depth must be between 1 and {}", limits.max_depth)));
    }
    if p.top_k == Some(0) {
        return Err(ApiError::BadRequest("top_k must be at least 1".into()));
    }
    let relation = parse_relation(p.relation.as_deref())?;
    let hood = neighbors(g, id, relation, depth, p.links.unwrap_or(true), p.top_k).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let truncated = hood.nodes.len() > limits.node_cap;
    let kept: Vec<_> = hood.nodes.iter().take(limits.node_cap).collect();
    let ids: BTreeSet<NodeId> = kept.iter().map(|n| n.node_id).collect();
    let nodes: Vec<Value> = kept
        .iter()
        .map(|n| {
            let mut v = node_json(g, n.node_id, Some(n.role.name()));
            v["hop"] = json!(n.hop);
            v
        })
        .collect();
    let edges: Vec<Value> = hood
        .edges
        .iter()
        .filter(|e| ids.contains(&e.src) && ids.contains(&e.dst))
        .map(|e| {
            json!({
                "src": e.src,
                "dst": e.dst,
                "relation": e.relation.name(),
                "subtype": e.subtype.map(|s| s.name()),
                "probability": e.probability,
                "support": e.support,
            })
        })
        .collect();
    let links: Vec<Value> = hood
        .links
        .iter()
        .filter(|k| ids.contains(&k.a) && ids.contains(&k.b))
        .map(|k| json!({ "a": k.a, "b": k.b, "score": k.score }))
        .collect();
    Ok(json!({ "seed": id, "nodes": nodes, "edges": edges, "links": links, "truncated": truncated }))
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct ContextParams {
    pub src: Option<NodeId>,
    pub dst: Option<NodeId>,
    pub relation: Option<String>,
}

/// Evidence sentences of one edge.
pub fn contexts(l: &Loaded, p: &ContextParams) -> ApiResult {
    let (Some(src), Some(dst)) = (p.src, p.dst) else {
        return Err(ApiError::BadRequest("`src` and `dst` are required".into()));
    };
    let relation = parse_relation(p.relation.as_deref())?.unwrap_or(Relation::Sequential);
    let e = l.graph.edge(src, dst, relation).ok_or_else(|| ApiError::NotFound(format!("no {} edge {src} -> {dst}", relation.name())))?;
    let ctx: Vec<Value> = e
        .evidence
        .iter()
        .map(|(doc, sent)| json!({ "doc_id": doc, "sent_index": sent, "text": l.sentences.get(&(doc.clone(), *sent)) }))
        .collect();
    Ok(json!({
        "src": node_json(&l.graph, src, None),
        "dst": node_json(&l.graph, dst, None),
        "relation": relation.name(),
        "support": e.support,
        "probability": e.probability,
        "contexts": ctx,
    }))
}

/// Shared state. Reloading swaps the whole `Arc`, so a request sees either
/// the old graph or the new one.
#[derive(Debug)]
pub struct ServiceState {
    graph: RwLock<Option<Arc<Loaded>>>,
    pub limits: Limits,
}

impl ServiceState {
    pub fn new(loaded: Option<Loaded>, limits: Limits) -> Arc<Self> {
        Arc::new(ServiceState { graph: RwLock::new(loaded.map(Arc::new)), limits })
    }

    pub fn current(&self) -> Option<Arc<Loaded>> {
        self.graph.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn replace(&self, loaded: Loaded) {
        *self.graph.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(loaded));
    }

    fn require(&self) -> std::result::Result<Arc<Loaded>, ApiError> {
        self.current().ok_or(ApiError::Unavailable)
    }
}

type Shared = State<Arc<ServiceState>>;

fn reply(r: ApiResult) -> Response {
    match r {
        Ok(v) => Json(v).into_response(),
        Err(e) => e.into_response(),
    }
}

#[derive(Debug, Deserialize)]
struct SearchParams {
    q: Option<String>,
    limit: Option<usize>,
}

async fn health_route(State(s): Shared) -> Response {
    reply(health(s.current().as_deref()))
}

async fn search_route(State(s): Shared, q: std::result::Result<Query<SearchParams>, axum::extract::rejection::QueryRejection>) -> Response {
    let Ok(Query(q)) = q else { return ApiError::BadRequest("bad query parameters".into()).into_response() };
    reply(s.require().and_then(|l| search(&l, q.q.as_deref().unwrap_or(""), q.limit, &s.limits)))
}

async fn neighbors_route(
    State(s): Shared,
    id: std::result::Result<UrlPath<String>, axum::extract::rejection::PathRejection>,
    p: std::result::Result<Query<NeighborParams>, axum::extract::rejection::QueryRejection>,
) -> Response {
    let Ok(Query(p)) = p else { return ApiError::BadRequest("bad query parameters".into()).into_response() };
    let id = match id {
        Ok(UrlPath(raw)) => match raw.parse::<NodeId>() {
            Ok(id) => id,
            Err(_) => return ApiError::NotFound(format!("unknown node `{raw}`")).into_response(),
        },
        Err(_) => return ApiError::BadRequest("bad node id".into()).into_response(),
    };
    reply(s.require().and_then(|l| neighborhood(&l, id, &p, &s.limits)))
}

async fn contexts_route(State(s): Shared, p: std::result::Result<Query<ContextParams>, axum::extract::rejection::QueryRejection>) -> Response {
    let Ok(Query(p)) = p else { return ApiError::BadRequest("bad query parameters".into()).into_response() };
    reply(s.require().and_then(|l| contexts(&l, &p)))
}

pub fn router(state: Arc<ServiceState>, cors: &[String]) -> Result<Router> {
    let mut app = Router::new()
        .route("/health", get(health_route))
        .route("/events", get(search_route))
        .route("/events/{id}/neighbors", get(neighbors_route))
        .route("/edges/contexts", get(contexts_route))
        .with_state(state);
    if !cors.is_empty() {
        let origins = cors
            .iter()
            .map(|o| HeaderValue::from_str(o).map_err(|_| ElgError::Usage(format!("bad CORS origin `{o}`"))))
            .collect::<Result<Vec<_>>>()?;
        app = app.layer(CorsLayer::new().allow_origin(AllowOrigin::list(origins)).allow_methods([axum::http::Method::GET]));
    }
    Ok(app)
}

/// Binds and serves until ctrl-c. `on_bound` receives the actual address
/// (useful with port 0).
pub fn serve(loaded: Loaded, settings: &ServiceSection, on_bound: impl FnOnce(SocketAddr)) -> Result<()> {
    let state = ServiceState::new(Some(loaded), Limits::from(settings));
    let app = router(state, &settings.cors)?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| ElgError::Internal(e.to_string()))?;
    rt.block_on(async {
        let addr = format!("{}:{}", settings.bind, settings.port);
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| ElgError::Usage(format!("cannot bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| ElgError::Internal(e.to_string()))?;
        on_bound(local);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| ElgError::Internal(e.to_string()))
    })
}
