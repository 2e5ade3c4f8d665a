//! Prototype graphs: typed node multisets plus typed edges, the unit that
//! flows through every pipeline stage.

mod sparql;
mod validate;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::OntologyIndex;

pub use sparql::to_sparql;
pub use validate::{correct_graph, validate_graph, ValidationReport, Violation, ViolationKind};

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("not a JSON document: {0}")]
    NotJson(String),
    #[error("graph JSON is missing or mistyped field `{0}`")]
    Schema(String),
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("edge {edge} references undefined node `{node}`")]
    DanglingEdge { edge: usize, node: String },
    #[error("unresolvable {kind} `{iri}`")]
    Unresolved { kind: &'static str, iri: String },
    #[error("cannot emit SPARQL for a graph in stage {0:?}")]
    InvalidStage(Stage),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Open-vocabulary extraction; class and link fields hold free text.
    #[default]
    Raw,
    Constrained,
    Corrected,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    /// Class iri, or a free-text label while the graph is raw.
    pub class: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphEdge {
    #[serde(rename = "from")]
    pub tail: String,
    pub link: String,
    #[serde(rename = "to")]
    pub head: String,
}

impl GraphNode {
    pub fn new(id: impl Into<String>, class: impl Into<String>) -> Self {
        Self { id: id.into(), class: class.into() }
    }
}

impl GraphEdge {
    pub fn new(tail: impl Into<String>, link: impl Into<String>, head: impl Into<String>) -> Self {
        Self { tail: tail.into(), link: link.into(), head: head.into() }
    }

    pub fn reversed(&self) -> Self {
        Self { tail: self.head.clone(), link: self.link.clone(), head: self.tail.clone() }
    }
}

#[derive(Deserialize)]
struct GraphDoc {
    nodes: Vec<GraphNode>,
    edges: Vec<GraphEdge>,
    #[serde(default)]
    stage: Stage,
}

/// A prototype graph. Node ids are unique and every edge endpoint names an
/// existing node; both are checked on construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphDoc")]
pub struct PrototypeGraph {
    nodes: Vec<GraphNode>,
    edges: Vec<GraphEdge>,
    stage: Stage,
}

impl TryFrom<GraphDoc> for PrototypeGraph {
    type Error = GraphError;

    fn try_from(doc: GraphDoc) -> Result<Self, Self::Error> {
        PrototypeGraph::new(doc.nodes, doc.edges, doc.stage)
    }
}

impl PrototypeGraph {
    pub fn new(nodes: Vec<GraphNode>, edges: Vec<GraphEdge>, stage: Stage) -> Result<Self, GraphError> {
        let mut ids = HashSet::new();
        for node in &nodes {
            if !ids.insert(node.id.as_str()) {
                return Err(GraphError::DuplicateNode(node.id.clone()));
            }
        }
        for (i, edge) in edges.iter().enumerate() {
            for end in [&edge.tail, &edge.head] {
                if !ids.contains(end.as_str()) {
                    return Err(GraphError::DanglingEdge { edge: i, node: end.clone() });
                }
            }
        }
        Ok(Self { nodes, edges, stage })
    }

    pub fn empty(stage: Stage) -> Self {
        Self { nodes: Vec::new(), edges: Vec::new(), stage }
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn with_stage(mut self, stage: Stage) -> Self {
        self.stage = stage;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: &str) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Map from node id to class, for edge lookups.
    pub fn class_of(&self) -> HashMap<&str, &str> {
        self.nodes.iter().map(|n| (n.id.as_str(), n.class.as_str())).collect()
    }

    /// Edges expanded to `(tail class, link, head class)` triples.
    pub fn typed_edges(&self) -> Vec<(String, String, String)> {
        let classes = self.class_of();
        self.edges
            .iter()
            .map(|e| (classes[e.tail.as_str()].to_string(), e.link.clone(), classes[e.head.as_str()].to_string()))
            .collect()
    }

    /// Rewrites class and link fields, keeping ids and structure.
    pub fn map_terms(&self, mut class_fn: impl FnMut(&str) -> String, mut link_fn: impl FnMut(&str) -> String) -> Self {
        Self {
            nodes: self.nodes.iter().map(|n| GraphNode::new(&n.id, class_fn(&n.class))).collect(),
            edges: self.edges.iter().map(|e| GraphEdge::new(&e.tail, link_fn(&e.link), &e.head)).collect(),
            stage: self.stage,
        }
    }

    /// Renames every node to `{label}_{n}` where `label` comes from
    /// `label_of(class)`, lowercased with non-alphanumerics replaced by `_`,
    /// and `n` counts nodes sharing that base from 1 in input order.
    pub fn with_canonical_ids(&self, label_of: impl Fn(&str) -> String) -> Self {
        let labels: Vec<String> = self.nodes.iter().map(|n| label_of(&n.class)).collect();
        let ids = canonical_ids(labels.iter().map(String::as_str));
        let rename: HashMap<&str, &str> =
            self.nodes.iter().zip(&ids).map(|(n, id)| (n.id.as_str(), id.as_str())).collect();
        Self {
            nodes: self.nodes.iter().zip(&ids).map(|(n, id)| GraphNode::new(id, &n.class)).collect(),
            edges: self
                .edges
                .iter()
                .map(|e| GraphEdge::new(rename[e.tail.as_str()], &e.link, rename[e.head.as_str()]))
                .collect(),
            stage: self.stage,
        }
    }

    /// Compact JSON in the LM output schema with classes and links replaced
    /// by their ontology labels.
    pub fn to_label_json(&self, index: &OntologyIndex) -> String {
        let labelled = self.map_terms(
            |c| index.class(c).map(|d| d.label.clone()).unwrap_or_else(|| c.to_string()),
            |l| index.link(l).map(|d| d.label.clone()).unwrap_or_else(|| l.to_string()),
        );
        labelled.to_lm_json()
    }

    /// Compact JSON in the LM output schema, fields as stored.
    pub fn to_lm_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            nodes: &'a [GraphNode],
            edges: &'a [GraphEdge],
        }
        serde_json::to_string(&Doc { nodes: &self.nodes, edges: &self.edges }).expect("graph serialization cannot fail")
    }
}

/// Lowercase a label and replace every non-alphanumeric with `_`.
pub fn normalize_label(label: &str) -> String {
    let s: String =
        label.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' }).collect();
    if s.is_empty() {
        "node".to_string()
    } else {
        s
    }
}

/// `person, person, university` → `person_1, person_2, university_1`.
pub fn canonical_ids<'a>(labels: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut counters: HashMap<String, usize> = HashMap::new();
    let mut taken: HashSet<String> = HashSet::new();
    let mut out = Vec::new();
    for label in labels {
        let base = normalize_label(label);
        let counter = counters.entry(base.clone()).or_insert(0);
        let id = loop {
            *counter += 1;
            let candidate = format!("{base}_{counter}");
            if taken.insert(candidate.clone()) {
                break candidate;
            }
        };
        out.push(id);
    }
    out
}

/// What happened while importing LM output.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct JsonImport {
    pub dropped_edges: usize,
    pub renamed_nodes: Vec<(String, String)>,
}

/// Reads the LM graph schema (`{"nodes":[{"id","class"}],"edges":[{"from","link","to"}]}`).
/// Duplicate node ids get a `_2`, `_3`, ... suffix; edges naming unknown
/// nodes are dropped and counted. Edges resolve ids against the first node
/// that used them.
pub fn graph_from_json(text: &str, stage: Stage) -> Result<(PrototypeGraph, JsonImport), GraphError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| GraphError::NotJson(e.to_string()))?;
    let obj = value.as_object().ok_or_else(|| GraphError::Schema("<root>".into()))?;
    let nodes = obj.get("nodes").and_then(|v| v.as_array()).ok_or_else(|| GraphError::Schema("nodes".into()))?;
    let edges = obj.get("edges").and_then(|v| v.as_array()).ok_or_else(|| GraphError::Schema("edges".into()))?;

    let field = |v: &serde_json::Value, name: &str, ctx: &str| -> Result<String, GraphError> {
        v.get(name)
            .and_then(|f| f.as_str())
            .map(str::to_string)
            .ok_or_else(|| GraphError::Schema(format!("{ctx}.{name}")))
    };

    let mut import = JsonImport::default();
    let mut taken: HashSet<String> = HashSet::new();
    let mut out_nodes = Vec::with_capacity(nodes.len());
    for node in nodes {
        let id = field(node, "id", "nodes[]")?;
        let class = field(node, "class", "nodes[]")?;
        let unique = if taken.contains(&id) {
            let mut n = 2;
            loop {
                let candidate = format!("{id}_{n}");
                if !taken.contains(&candidate) {
                    break candidate;
                }
                n += 1;
            }
        } else {
            id.clone()
        };
        if unique != id {
            import.renamed_nodes.push((id, unique.clone()));
        }
        taken.insert(unique.clone());
        out_nodes.push(GraphNode::new(unique, class));
    }

    let mut out_edges = Vec::with_capacity(edges.len());
    for edge in edges {
        let tail = field(edge, "from", "edges[]")?;
        let link = field(edge, "link", "edges[]")?;
        let head = field(edge, "to", "edges[]")?;
        if taken.contains(&tail) && taken.contains(&head) {
            out_edges.push(GraphEdge::new(tail, link, head));
        } else {
            import.dropped_edges += 1;
        }
    }
    let graph = PrototypeGraph::new(out_nodes, out_edges, stage)?;
    Ok((graph, import))
}
