mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use onset_core::fixtures::{self, dbo};
use onset_core::lm::{LmBackend, MockOracle, MockScripted};
use onset_core::service::{router, AppState, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

use common::{query_shape, ALUMNI_SPARQL};

fn state(backend: Option<Arc<dyn LmBackend>>) -> AppState {
    let mut st = AppState::from_config(&ServiceConfig::builtin_fixture()).unwrap();
    st.backend = backend;
    st
}

fn app(backend: Option<Arc<dyn LmBackend>>) -> Router {
    router(Arc::new(state(backend)), &[])
}

fn oracle_app() -> Router {
    app(Some(Arc::new(MockOracle::new(fixtures::alumni_graph(), fixtures::dbpedia_excerpt()))))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn post_json(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let (status, text) = call(app, "POST", uri, Some(body.to_string())).await;
    (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
}

fn graph_json(g: &onset_core::graph::PrototypeGraph) -> Value {
    serde_json::to_value(g).unwrap()
}

fn flipped_alumni() -> Value {
    let mut v = graph_json(&fixtures::alumni_graph());
    let e = &mut v["edges"][1];
    let (from, to) = (e["from"].clone(), e["to"].clone());
    e["from"] = to;
    e["to"] = from;
    v["stage"] = json!("constrained");
    v
}

#[tokio::test]
async fn health_and_ontologies() {
    let app = app(None);
    let (status, body) = call(&app, "GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let (status, body) = call(&app, "GET", "/ontologies", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body.contains("dbpedia"), "{body}");
}

#[tokio::test]
async fn extract_alumni_query_yields_expected_sparql() {
    let app = oracle_app();
    let (status, v) = post_json(&app, "/extract", json!({"query": fixtures::ALUMNI_QUERY})).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["trace"]["status"], "ok");
    let sparql = v["sparql"].as_str().unwrap();
    assert_eq!(query_shape(sparql), query_shape(ALUMNI_SPARQL));
    let corrected: onset_core::graph::PrototypeGraph =
        serde_json::from_value(v["trace"]["corrected_graph"].clone()).unwrap();
    assert_eq!(corrected, fixtures::alumni_graph());
}

#[tokio::test]
async fn extract_response_matches_schema() {
    let schema: Value = serde_json::from_str(include_str!("../schemas/extract_response.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();

    let (status, ok) = post_json(&oracle_app(), "/extract", json!({"query": "anything", "k": 8})).await;
    assert_eq!(status, StatusCode::OK);
    let errors: Vec<String> = validator.iter_errors(&ok).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");

    let empty = app(Some(Arc::new(MockScripted::new([r#"{"nodes":[],"edges":[]}"#.to_string()]))));
    let (status, none) = post_json(&empty, "/extract", json!({"query": "nothing here"})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(none["trace"]["status"], "no_graph");
    assert!(none["sparql"].is_null());
    let errors: Vec<String> = validator.iter_errors(&none).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");

    let mut broken = ok.clone();
    broken["trace"]["status"] = json!("bogus");
    assert!(!validator.is_valid(&broken));
}

#[tokio::test]
async fn extract_rejects_bad_input() {
    let app = oracle_app();
    for body in [
        json!({"query": "   "}),
        json!({"query": "x", "k": 0}),
        json!({"query": "x", "ontology": "nope"}),
        json!({"nope": 1}),
    ] {
        let (status, v) = post_json(&app, "/extract", body.clone()).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body} -> {v}");
        assert!(v["error"].is_string());
    }
}

#[tokio::test]
async fn extract_backend_failures_name_the_stage() {
    let (status, v) = post_json(&app(None), "/extract", json!({"query": "x"})).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(v["stage"], "raw");

    let junk = app(Some(Arc::new(MockScripted::new(["not json".to_string()]))));
    let (status, v) = post_json(&junk, "/extract", json!({"query": "x"})).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(v["stage"], "raw");

    // raw succeeds, then the constrained answer is not in the candidate vocabulary
    let raw = r#"{"nodes":[{"id":"a","class":"person"}],"edges":[]}"#.to_string();
    let bad = r#"{"nodes":[{"id":"a","class":"spaceship"}],"edges":[]}"#.to_string();
    let two = app(Some(Arc::new(MockScripted::new([raw, bad]))));
    let (status, v) = post_json(&two, "/extract", json!({"query": "x"})).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(v["stage"], "constrained");
}

#[tokio::test]
async fn validate_correct_sparql_round_trip() {
    let app = app(None);
    let flipped = flipped_alumni();

    let (status, report) = post_json(&app, "/graphs/validate", flipped.clone()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report, json!({"violations": [{"edge": 1, "kind": "flipped"}]}));

    let (status, text) = call(&app, "POST", "/graphs/sparql", Some(flipped.to_string())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{text}");
    let err: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(err["detail"]["violations"][0]["kind"], "flipped");

    let (status, corrected) = post_json(&app, "/graphs/correct", flipped).await;
    assert_eq!(status, StatusCode::OK, "{corrected}");
    assert_eq!(corrected["stage"], "corrected");
    let (_, report) = post_json(&app, "/graphs/validate", corrected.clone()).await;
    assert_eq!(report, json!({"violations": []}));

    let (status, text) = call(&app, "POST", "/graphs/sparql", Some(corrected.to_string())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(query_shape(&text), query_shape(ALUMNI_SPARQL));
}

#[tokio::test]
async fn correct_drops_invalid_edges_and_refuses_unknown_terms() {
    let app = app(None);
    let g = json!({
        "nodes": [{"id": "a", "class": dbo("Person")}, {"id": "b", "class": dbo("Film")}],
        "edges": [{"from": "a", "link": dbo("child"), "to": "b"}],
        "stage": "constrained"
    });
    let (status, report) = post_json(&app, "/graphs/validate", g.clone()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["violations"][0]["kind"], "invalid");
    // invalid both ways: the edge is dropped
    let (status, v) = post_json(&app, "/graphs/correct", g).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["edges"], json!([]));
    assert_eq!(v["nodes"].as_array().unwrap().len(), 2);

    let unknown_link = json!({
        "nodes": [{"id": "a", "class": dbo("Person")}, {"id": "b", "class": dbo("Person")}],
        "edges": [{"from": "a", "link": "http://example.org/nope", "to": "b"}]
    });
    let (status, v) = post_json(&app, "/graphs/correct", unknown_link).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{v}");

    let unknown = json!({"nodes": [{"id": "a", "class": "http://example.org/Nope"}], "edges": []});
    let (status, report) = post_json(&app, "/graphs/validate", unknown).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["violations"][0], json!({"node": "a", "kind": "unknown_class"}));
}

#[tokio::test]
async fn malformed_graphs_are_bad_requests() {
    let app = app(None);
    let dangling = json!({"nodes": [{"id": "a", "class": dbo("Person")}],
                          "edges": [{"from": "a", "link": dbo("child"), "to": "zz"}]});
    for uri in ["/graphs/validate", "/graphs/correct", "/graphs/sparql"] {
        let (status, _) = post_json(&app, uri, dangling.clone()).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
    }
}

#[tokio::test]
async fn search_ranks_and_filters() {
    let app = app(None);
    let (status, v) = post_json(&app, "/search", json!({"text": "alma mater", "kind": "links", "k": 3})).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let items = v["items"].as_array().unwrap();
    assert_eq!(items.len(), 3);
    assert_eq!(items[0]["iri"], dbo("almaMater"));

    let (status, v) = post_json(
        &app,
        "/search",
        json!({"text": "place", "kind": "links", "k": 50,
               "attach_to": {"class": dbo("University"), "side": "outgoing"}}),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let idx = fixtures::dbpedia_excerpt();
    let items = v["items"].as_array().unwrap();
    assert!(!items.is_empty());
    for it in items {
        let def = idx.link(it["iri"].as_str().unwrap()).unwrap();
        assert!(idx.subtypeof(&dbo("University"), &def.from_type).unwrap(), "{it}");
    }

    for k in [0, -3] {
        let (status, _) = post_json(&app, "/search", json!({"text": "x", "kind": "classes", "k": k})).await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
    }
}

#[tokio::test]
async fn execute_against_bundled_triples() {
    let app = app(None);
    let g = graph_json(&fixtures::alumni_graph());
    let (status, v) = post_json(&app, "/execute", json!({"graph": g})).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["columns"], json!(["person_1", "person_2", "university_1"]));
    let kg = |s: &str| format!("http://example.org/kg/{s}");
    assert_eq!(v["rows"], json!([[kg("alice"), kg("bob"), kg("tugraz")]]));

    let persons = json!({"nodes": [{"id": "p", "class": dbo("Person")}], "edges": []});
    let (_, v) = post_json(&app, "/execute", json!({"graph": persons, "limit": 2})).await;
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);

    let (status, _) = post_json(&app, "/execute", json!({"sparql": "SELECT * WHERE { ?s ?p ?o }"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = post_json(&app, "/execute", json!({"graph": flipped_alumni()})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn execute_without_data_or_endpoint_is_unavailable() {
    let mut cfg = ServiceConfig::builtin_fixture();
    cfg.ontologies[0].builtin = Some("toy".into());
    let st = AppState::from_config(&cfg).unwrap();
    assert!(st.sparql_url.is_none());
    let app = router(Arc::new(st), &[]);
    let (status, v) = post_json(&app, "/execute", json!({"sparql": "SELECT * WHERE { ?s ?p ?o }"})).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE, "{v}");
}

#[tokio::test]
async fn unreachable_sparql_endpoint_is_a_gateway_error() {
    let mut cfg = ServiceConfig::builtin_fixture();
    cfg.ontologies[0].builtin = Some("toy".into());
    let mut st = AppState::from_config(&cfg).unwrap();
    st.sparql_url = Some("http://127.0.0.1:9/sparql".into());
    let app = router(Arc::new(st), &[]);
    let (status, _) = post_json(&app, "/execute", json!({"sparql": "SELECT * WHERE { ?s ?p ?o }"})).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
}

#[tokio::test]
async fn cors_preflight_is_answered() {
    let app = router(Arc::new(state(None)), &["http://localhost:5173".to_string()]);
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/extract")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(
        resp.headers().get("access-control-allow-origin").map(|h| h.to_str().unwrap()),
        Some("http://localhost:5173")
    );
}
