//! HTTP JSON API over the pipeline, graph operations, retrieval and query
//! execution.

mod config;

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use config::{ConfigError, EmbeddingConfig, LmConfig, LoadedOntology, OntologyConfig, ServiceConfig};

use crate::eval::bgp_match;
use crate::graph::{correct_graph, to_sparql, validate_graph, GraphError, PrototypeGraph, Stage};
use crate::lm::{LmBackend, LmSettings};
use crate::ontology::Side;
use crate::pipeline::{run_pipeline, PipelineTrace};
use crate::semantic::{ItemKind, ScoredItem};

pub struct AppState {
    pub ontologies: BTreeMap<String, LoadedOntology>,
    pub default_ontology: String,
    pub backend: Option<Arc<dyn LmBackend>>,
    pub settings: LmSettings,
    pub retrieval_k: usize,
    pub sparql_url: Option<String>,
}

impl AppState {
    pub fn from_config(cfg: &ServiceConfig) -> Result<Self, ConfigError> {
        let embedder = cfg.embedder()?;
        let mut ontologies = BTreeMap::new();
        for o in &cfg.ontologies {
            ontologies.insert(o.id.clone(), o.load(embedder.clone(), cfg.embedding.cache_dir.as_deref())?);
        }
        Ok(Self {
            ontologies,
            default_ontology: cfg.ontologies[0].id.clone(),
            backend: cfg.lm_backend()?,
            settings: cfg.lm_settings(),
            retrieval_k: cfg.retrieval_k,
            sparql_url: cfg.sparql_url.clone(),
        })
    }

    fn ontology(&self, id: Option<&str>) -> Result<&LoadedOntology, ApiError> {
        let id = id.unwrap_or(&self.default_ontology);
        self.ontologies
            .get(id)
            .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, format!("unknown ontology `{id}`")))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    stage: Option<String>,
    detail: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into(), stage: None, detail: None }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"error": self.message});
        if let Some(stage) = self.stage {
            body["stage"] = json!(stage);
        }
        if let Some(detail) = self.detail {
            body["detail"] = detail;
        }
        (self.status, Json(body)).into_response()
    }
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}

type Shared = Arc<AppState>;

#[derive(Debug, Deserialize)]
struct ExtractRequest {
    query: String,
    ontology: Option<String>,
    k: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct ExtractResponse {
    pub trace: PipelineTrace,
    pub sparql: Option<String>,
}

async fn extract(State(state): State<Shared>, body: Bytes) -> Result<Json<ExtractResponse>, ApiError> {
    let req: ExtractRequest = parse_json(&body)?;
    if req.query.trim().is_empty() {
        return Err(ApiError::bad_request("query is empty"));
    }
    state.ontology(req.ontology.as_deref())?;
    let k = req.k.unwrap_or(state.retrieval_k);
    if k == 0 {
        return Err(ApiError::bad_request("k must be at least 1"));
    }
    let Some(backend) = state.backend.clone() else {
        let mut e = ApiError::new(StatusCode::BAD_GATEWAY, "no LM endpoint configured");
        e.stage = Some("raw".into());
        return Err(e);
    };
    let st = state.clone();
    let result = blocking(move || {
        let onto = st.ontology(req.ontology.as_deref()).expect("checked above");
        run_pipeline(&req.query, &onto.index, &onto.sidx, backend.as_ref(), k, &st.settings)
    })
    .await?;
    let trace = result.map_err(|e| {
        let status = if e.is_input_error() { StatusCode::BAD_REQUEST } else { StatusCode::BAD_GATEWAY };
        ApiError { status, message: e.failure.to_string(), stage: Some(e.stage.as_str().into()), detail: None }
    })?;
    let sparql = match &trace.corrected_graph {
        Some(g) => Some(to_sparql(g).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?),
        None => None,
    };
    Ok(Json(ExtractResponse { trace, sparql }))
}

#[derive(Debug, Deserialize)]
struct OntologyParam {
    ontology: Option<String>,
}

fn graph_body(body: &Bytes) -> Result<PrototypeGraph, ApiError> {
    parse_json(body)
}

fn graph_error(e: GraphError) -> ApiError {
    match e {
        GraphError::Unresolved { .. } => ApiError::unprocessable(e.to_string()),
        other => ApiError::bad_request(other.to_string()),
    }
}

async fn validate(
    State(state): State<Shared>,
    Query(q): Query<OntologyParam>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let g = graph_body(&body)?;
    let onto = state.ontology(q.ontology.as_deref())?;
    Ok(Json(validate_graph(&g, &onto.index)).into_response())
}

async fn correct(
    State(state): State<Shared>,
    Query(q): Query<OntologyParam>,
    body: Bytes,
) -> Result<Json<PrototypeGraph>, ApiError> {
    let g = graph_body(&body)?;
    let onto = state.ontology(q.ontology.as_deref())?;
    Ok(Json(correct_graph(&g, &onto.index).map_err(graph_error)?))
}

/// Emits SPARQL for a graph that validates clean, whatever its stage label.
fn sparql_for(g: &PrototypeGraph, onto: &LoadedOntology) -> Result<String, ApiError> {
    let report = validate_graph(g, &onto.index);
    if !report.is_valid() {
        let mut e = ApiError::unprocessable("graph does not validate against the ontology");
        e.detail = Some(serde_json::to_value(&report).expect("report serializes"));
        return Err(e);
    }
    let g = match g.stage() {
        Stage::Corrected | Stage::Sampled => g.clone(),
        _ => g.clone().with_stage(Stage::Corrected),
    };
    to_sparql(&g).map_err(graph_error)
}

async fn sparql(
    State(state): State<Shared>,
    Query(q): Query<OntologyParam>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let g = graph_body(&body)?;
    let onto = state.ontology(q.ontology.as_deref())?;
    let text = sparql_for(&g, onto)?;
    Ok(([(axum::http::header::CONTENT_TYPE, "application/sparql-query; charset=utf-8")], text).into_response())
}

#[derive(Debug, Deserialize)]
struct AttachTo {
    class: String,
    side: Side,
}

#[derive(Debug, Deserialize)]
struct SearchRequest {
    text: String,
    kind: ItemKind,
    k: i64,
    attach_to: Option<AttachTo>,
    ontology: Option<String>,
}

#[derive(Debug, Serialize)]
struct SearchResponse {
    items: Vec<ScoredItem>,
}

async fn search(State(state): State<Shared>, body: Bytes) -> Result<Json<SearchResponse>, ApiError> {
    let req: SearchRequest = parse_json(&body)?;
    if req.k < 1 {
        return Err(ApiError::bad_request("k must be at least 1"));
    }
    let k = req.k as usize;
    let st = state.clone();
    let items = blocking(move || -> Result<Vec<ScoredItem>, ApiError> {
        let onto = st.ontology(req.ontology.as_deref())?;
        let err = |e: crate::semantic::SemanticError| {
            let mut api = ApiError::new(StatusCode::BAD_GATEWAY, e.to_string());
            api.stage = Some("candidates".into());
            api
        };
        match req.attach_to {
            None => onto.sidx.top_k(&req.text, req.kind, k).map_err(err),
            Some(at) => {
                if req.kind != ItemKind::Links {
                    return Err(ApiError::bad_request("attach_to applies to link search only"));
                }
                let allowed: std::collections::HashSet<String> = onto
                    .index
                    .links_for(&at.class, at.side)
                    .map_err(|e| ApiError::unprocessable(e.to_string()))?
                    .into_iter()
                    .map(|l| l.iri.clone())
                    .collect();
                let all = onto.sidx.top_k(&req.text, ItemKind::Links, onto.sidx.len(ItemKind::Links).max(1));
                Ok(all.map_err(err)?.into_iter().filter(|i| allowed.contains(&i.iri)).take(k).collect())
            }
        }
    })
    .await??;
    Ok(Json(SearchResponse { items }))
}

#[derive(Debug, Deserialize)]
struct ExecuteRequest {
    graph: Option<PrototypeGraph>,
    sparql: Option<String>,
    ontology: Option<String>,
    limit: Option<usize>,
}

#[derive(Debug, Serialize, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<String>>>,
}

pub const DEFAULT_LIMIT: usize = 100;

fn with_limit(query: &str, limit: usize) -> String {
    if query.to_ascii_uppercase().contains("LIMIT") {
        return query.to_string();
    }
    let mut q = query.trim_end().to_string();
    q.push_str(&format!("\nLIMIT {limit}\n"));
    q
}

fn parse_sparql_results(v: &Value) -> Result<ResultTable, String> {
    let columns: Vec<String> = v
        .pointer("/head/vars")
        .and_then(Value::as_array)
        .ok_or("missing head.vars")?
        .iter()
        .filter_map(|c| c.as_str().map(str::to_string))
        .collect();
    let bindings = v.pointer("/results/bindings").and_then(Value::as_array).ok_or("missing results.bindings")?;
    let rows = bindings
        .iter()
        .map(|b| {
            columns
                .iter()
                .map(|c| b.get(c).and_then(|t| t.get("value")).and_then(Value::as_str).map(str::to_string))
                .collect()
        })
        .collect();
    Ok(ResultTable { columns, rows })
}

async fn execute(State(state): State<Shared>, body: Bytes) -> Result<Json<ResultTable>, ApiError> {
    let req: ExecuteRequest = parse_json(&body)?;
    let limit = req.limit.unwrap_or(DEFAULT_LIMIT);
    let st = state.clone();
    let table = blocking(move || -> Result<ResultTable, ApiError> {
        let onto = st.ontology(req.ontology.as_deref())?;
        if let Some(triples) = &onto.triples {
            let Some(g) = &req.graph else {
                return Err(ApiError::bad_request("local execution needs a graph, not SPARQL text"));
            };
            sparql_for(g, onto)?;
            let columns: Vec<String> = g.nodes().iter().map(|n| n.id.clone()).collect();
            let rows = bgp_match(g, triples, &onto.index)
                .into_iter()
                .take(limit)
                .map(|b| columns.iter().map(|c| b.get(c).cloned()).collect())
                .collect();
            return Ok(ResultTable { columns, rows });
        }
        let Some(url) = &st.sparql_url else {
            return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no SPARQL endpoint or local data configured"));
        };
        let query = match (&req.graph, &req.sparql) {
            (Some(g), _) => sparql_for(g, onto)?,
            (None, Some(q)) => q.clone(),
            (None, None) => return Err(ApiError::bad_request("provide `graph` or `sparql`")),
        };
        let client = reqwest::blocking::Client::new();
        let resp = client
            .post(url)
            .header("Accept", "application/sparql-results+json")
            .form(&[("query", with_limit(&query, limit))])
            .send()
            .map_err(|e| ApiError::new(StatusCode::BAD_GATEWAY, format!("SPARQL endpoint unreachable: {e}")))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ApiError::new(StatusCode::BAD_GATEWAY, e.to_string()))?;
        if !status.is_success() {
            let code = StatusCode::from_u16(status.as_u16()).unwrap_or(StatusCode::BAD_GATEWAY);
            return Err(ApiError::new(code, text));
        }
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| ApiError::new(StatusCode::BAD_GATEWAY, format!("bad SPARQL results: {e}")))?;
        parse_sparql_results(&v).map_err(|e| ApiError::new(StatusCode::BAD_GATEWAY, e))
    })
    .await??;
    Ok(Json(table))
}

async fn list_ontologies(State(state): State<Shared>) -> Json<Value> {
    let items: Vec<Value> = state
        .ontologies
        .iter()
        .map(|(id, o)| {
            json!({
                "id": id,
                "classes": o.index.class_count(),
                "links": o.index.link_count(),
                "local_data": o.triples.is_some(),
            })
        })
        .collect();
    Json(json!({"default": state.default_ontology, "ontologies": items}))
}

pub fn router(state: Arc<AppState>, cors_origins: &[String]) -> Router {
    let origins = if cors_origins.is_empty() {
        AllowOrigin::from(Any)
    } else {
        AllowOrigin::list(cors_origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    let cors = CorsLayer::new().allow_origin(origins).allow_methods(Any).allow_headers(Any);
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/ontologies", get(list_ontologies))
        .route("/extract", post(extract))
        .route("/graphs/validate", post(validate))
        .route("/graphs/correct", post(correct))
        .route("/graphs/sparql", post(sparql))
        .route("/search", post(search))
        .route("/execute", post(execute))
        .layer(cors)
        .with_state(state)
}

pub async fn serve(cfg: ServiceConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let cors = cfg.cors_origins.clone();
    let listen = cfg.listen.clone();
    let state = tokio::task::spawn_blocking(move || AppState::from_config(&cfg)).await??;
    let app = router(Arc::new(state), &cors);
    let listener = tokio::net::TcpListener::bind(&listen).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limit_is_appended_once() {
        assert_eq!(with_limit("SELECT * WHERE {\n}\n", 5), "SELECT * WHERE {\n}\nLIMIT 5\n");
        assert_eq!(with_limit("SELECT * WHERE {} LIMIT 2", 5), "SELECT * WHERE {} LIMIT 2");
    }

    #[test]
    fn sparql_results_parse() {
        let v = json!({
            "head": {"vars": ["a", "b"]},
            "results": {"bindings": [{"a": {"type": "uri", "value": "x"}}]}
        });
        let t = parse_sparql_results(&v).unwrap();
        assert_eq!(t.columns, ["a", "b"]);
        assert_eq!(t.rows, vec![vec![Some("x".to_string()), None]]);
    }
}
