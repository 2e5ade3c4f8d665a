//! Grammar-constrained LM calls: the two extraction passes and query
//! generation for the benchmark.

mod http;
mod mock;
pub mod prompts;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{constrained_grammar, static_schema_grammar, GrammarError, GrammarSpec};
use crate::graph::{graph_from_json, GraphError, PrototypeGraph, Stage};
use crate::ontology::OntologyIndex;
use crate::semantic::CandidateSet;

pub use http::{HttpBackend, WireMode};
pub use mock::{MockOracle, MockScripted, SamplingBackend};

pub const MIN_GRAPH_TOKENS: u32 = 64;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("query text is empty")]
    EmptyQuery,
    #[error("LM endpoint unreachable: {0}")]
    Transport(String),
    #[error("LM endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected LM response: {0}")]
    Protocol(String),
    #[error("completion does not conform to the grammar: {completion:?}")]
    NonConforming { completion: String },
    #[error("completion uses label `{label}` outside the candidate set: {completion:?}")]
    Unmappable { label: String, completion: String },
    #[error("max_tokens must be at least {MIN_GRAPH_TOKENS} for graph output")]
    TokenBudget,
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("mock backend: {0}")]
    Mock(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    GrammarHttp,
    SchemaHttp,
    MockOracle,
    MockScripted,
    MockSampler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmRequest {
    pub prompt: String,
    pub grammar: Option<GrammarSpec>,
    pub max_tokens: u32,
    pub temperature: f32,
    pub seed: Option<u64>,
    pub model: String,
}

/// Generation parameters shared by every request of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmSettings {
    pub model: String,
    pub temperature: f32,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self { model: "default".into(), temperature: 0.2, max_tokens: 1024, seed: Some(42) }
    }
}

impl LmSettings {
    fn request(&self, prompt: String, grammar: Option<GrammarSpec>) -> LmRequest {
        LmRequest {
            prompt,
            grammar,
            max_tokens: self.max_tokens,
            temperature: self.temperature,
            seed: self.seed,
            model: self.model.clone(),
        }
    }
}

/// A text completion service. Implementations must be usable from several
/// threads at once.
pub trait LmBackend: Send + Sync {
    fn kind(&self) -> BackendKind;
    fn complete(&self, req: &LmRequest) -> Result<String, LmError>;
}

fn complete_graph(backend: &dyn LmBackend, req: &LmRequest) -> Result<String, LmError> {
    if req.max_tokens < MIN_GRAPH_TOKENS {
        return Err(LmError::TokenBudget);
    }
    let grammar = req.grammar.as_ref().expect("graph requests carry a grammar");
    let completion = backend.complete(req)?;
    let trimmed = completion.trim();
    if !crate::grammar::recognize(grammar, trimmed)? {
        return Err(LmError::NonConforming { completion });
    }
    Ok(trimmed.to_string())
}

/// First pass: open-vocabulary graph; class and link fields hold whatever
/// text the model produced.
pub fn extract_raw(query: &str, backend: &dyn LmBackend, settings: &LmSettings) -> Result<PrototypeGraph, LmError> {
    if query.trim().is_empty() {
        return Err(LmError::EmptyQuery);
    }
    let req = settings.request(prompts::extraction_prompt(query), Some(static_schema_grammar()));
    let text = complete_graph(backend, &req)?;
    let (graph, _) = graph_from_json(&text, Stage::Raw)?;
    Ok(graph)
}

/// Second pass: same instruction, output restricted to the candidate
/// labels. Labels are mapped back to iris by candidate order and nodes are
/// renamed to `{label}_{n}`.
pub fn extract_constrained(
    query: &str,
    candidates: &CandidateSet,
    backend: &dyn LmBackend,
    index: &OntologyIndex,
    settings: &LmSettings,
) -> Result<PrototypeGraph, LmError> {
    if query.trim().is_empty() {
        return Err(LmError::EmptyQuery);
    }
    let grammar = constrained_grammar(candidates, index)?;
    let req = settings.request(prompts::extraction_prompt(query), Some(grammar));
    let text = complete_graph(backend, &req)?;
    let (graph, _) = graph_from_json(&text, Stage::Constrained)?;

    let class_iri = |label: &str| candidate_iri(label, &candidates.classes, |iri| index.class(iri).map(|c| &c.label));
    let link_iri = |label: &str| candidate_iri(label, &candidates.links, |iri| index.link(iri).map(|l| &l.label));
    let unmapped = graph
        .nodes()
        .iter()
        .find(|n| class_iri(&n.class).is_none())
        .map(|n| n.class.clone())
        .or_else(|| graph.edges().iter().find(|e| link_iri(&e.link).is_none()).map(|e| e.link.clone()));
    if let Some(label) = unmapped {
        return Err(LmError::Unmappable { label, completion: text });
    }
    let mapped = graph.map_terms(|c| class_iri(c).unwrap_or_default(), |l| link_iri(l).unwrap_or_default());
    Ok(mapped.with_canonical_ids(|iri| index.class(iri).map(|c| c.label.clone()).unwrap_or_default()))
}

/// First candidate whose ontology label (or retrieval label, for iris the
/// index does not know) equals `label`.
fn candidate_iri<'a>(
    label: &str,
    items: &[crate::semantic::ScoredItem],
    label_of: impl Fn(&str) -> Option<&'a String>,
) -> Option<String> {
    items.iter().find(|c| label_of(&c.iri).unwrap_or(&c.label) == label).map(|c| c.iri.clone())
}

/// Asks the model for a natural-language request matching a sampled graph,
/// using the one-shot prompt.
pub fn generate_query_text(
    g: &PrototypeGraph,
    backend: &dyn LmBackend,
    settings: &LmSettings,
) -> Result<String, LmError> {
    let prompt = prompts::query_generation_prompt(&prompts::render_graph(g));
    let completion = backend.complete(&settings.request(prompt, None))?;
    Ok(prompts::clean_completion(&completion))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, dbo};
    use crate::semantic::ScoredItem;

    const ALUMNI_RAW: &str = r#"{"nodes":[{"id":"p1","class":"person"},{"id":"p2","class":"person"},{"id":"u","class":"university"}],"edges":[{"from":"p1","link":"child","to":"p2"},{"from":"p1","link":"alma mater","to":"u"},{"from":"p2","link":"alma mater","to":"u"}]}"#;

    fn candidates() -> CandidateSet {
        let s = |iri: String, label: &str| ScoredItem { iri, label: label.into(), score: 0.9 };
        CandidateSet {
            classes: vec![s(dbo("Person"), "person"), s(dbo("University"), "university")],
            links: vec![s(dbo("child"), "child"), s(dbo("almaMater"), "alma mater")],
        }
    }

    #[test]
    fn raw_extraction_of_alumni() {
        let backend = MockScripted::new([ALUMNI_RAW]);
        let g = extract_raw(fixtures::ALUMNI_QUERY, &backend, &LmSettings::default()).unwrap();
        assert_eq!(g.nodes().len(), 3);
        assert_eq!(g.edges().len(), 3);
        assert_eq!(g.stage(), Stage::Raw);
    }

    #[test]
    fn empty_query_fails_before_any_request() {
        let backend = MockScripted::new(Vec::<String>::new());
        assert!(matches!(extract_raw("  ", &backend, &LmSettings::default()), Err(LmError::EmptyQuery)));
        assert_eq!(backend.calls(), 0);
    }

    #[test]
    fn empty_graph_is_not_an_error() {
        let backend = MockScripted::new([r#"{"nodes":[],"edges":[]}"#]);
        let g = extract_raw("anything", &backend, &LmSettings::default()).unwrap();
        assert!(g.is_empty());
    }

    #[test]
    fn small_token_budget_is_rejected() {
        let backend = MockScripted::new([ALUMNI_RAW]);
        let settings = LmSettings { max_tokens: 16, ..Default::default() };
        assert!(matches!(extract_raw("q", &backend, &settings), Err(LmError::TokenBudget)));
    }

    #[test]
    fn constrained_extraction_maps_labels_to_iris() {
        let idx = fixtures::dbpedia_excerpt();
        let backend = MockScripted::new([ALUMNI_RAW]);
        let g = extract_constrained("q", &candidates(), &backend, idx, &LmSettings::default()).unwrap();
        let expected = fixtures::alumni_graph().with_stage(Stage::Constrained);
        assert_eq!(g, expected);
    }

    #[test]
    fn node_only_candidates() {
        let idx = fixtures::dbpedia_excerpt();
        let mut c = candidates();
        c.classes.truncate(1);
        c.links.clear();
        let backend = MockScripted::new([r#"{"nodes":[{"id":"x","class":"person"}],"edges":[]}"#]);
        let g = extract_constrained("q", &c, &backend, idx, &LmSettings::default()).unwrap();
        assert!(g.edges().is_empty());
        assert_eq!(g.nodes()[0].class, dbo("Person"));
    }

    #[test]
    fn non_conforming_completion_is_surfaced() {
        let idx = fixtures::dbpedia_excerpt();
        let backend = MockScripted::new(["Sure! Here is your graph: ..."]);
        match extract_constrained("q", &candidates(), &backend, idx, &LmSettings::default()) {
            Err(LmError::NonConforming { completion }) => assert!(completion.starts_with("Sure!")),
            other => panic!("{other:?}"),
        }
        let backend = MockScripted::new([r#"{"nodes":[{"id":"x","class":"animal"}],"edges":[]}"#]);
        assert!(matches!(
            extract_constrained("q", &candidates(), &backend, idx, &LmSettings::default()),
            Err(LmError::NonConforming { .. })
        ));
    }

    #[test]
    fn query_generation_returns_cleaned_completion() {
        let g = PrototypeGraph::new(
            vec![
                crate::graph::GraphNode::new("person_1", dbo("Person")),
                crate::graph::GraphNode::new("university_1", dbo("University")),
            ],
            vec![crate::graph::GraphEdge::new("person_1", dbo("almaMater"), "university_1")],
            Stage::Sampled,
        )
        .unwrap();
        let backend = MockScripted::new(["  \"people who studied at a university\"\n"]);
        let text = generate_query_text(&g, &backend, &LmSettings::default()).unwrap();
        assert_eq!(text, "people who studied at a university");
        let prompt = &backend.requests()[0].prompt;
        assert!(prompt.contains("person_1 (Person) --almaMater--> university_1 (University)"));
        assert!(backend.requests()[0].grammar.is_none());
    }
}
