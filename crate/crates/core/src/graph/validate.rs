use serde::{Deserialize, Serialize};

use super::{GraphError, PrototypeGraph, Stage};
use crate::ontology::OntologyIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Valid only with tail and head swapped.
    Flipped,
    /// Valid in neither orientation.
    Invalid,
    UnknownClass,
    UnknownLink,
}

/// One problem found in a graph. Edge problems carry the edge index; a node
/// whose class does not resolve is reported by node id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub edge: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub node: Option<String>,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

fn edge_fits(index: &OntologyIndex, tail_class: &str, link: &str, head_class: &str) -> bool {
    let def = &index.link(link).expect("link resolved by caller");
    index.is_subtype(tail_class, &def.from_type) && index.is_subtype(head_class, &def.to_type)
}

/// Classifies every node and edge of `g` against the ontology.
pub fn validate_graph(g: &PrototypeGraph, index: &OntologyIndex) -> ValidationReport {
    let mut violations = Vec::new();
    for node in g.nodes() {
        if index.class(&node.class).is_none() {
            violations.push(Violation { edge: None, node: Some(node.id.clone()), kind: ViolationKind::UnknownClass });
        }
    }
    let classes = g.class_of();
    for (i, edge) in g.edges().iter().enumerate() {
        let tail = classes[edge.tail.as_str()];
        let head = classes[edge.head.as_str()];
        let kind = if index.link(&edge.link).is_none() {
            Some(ViolationKind::UnknownLink)
        } else if index.class(tail).is_none() || index.class(head).is_none() {
            Some(ViolationKind::UnknownClass)
        } else if edge_fits(index, tail, &edge.link, head) {
            None
        } else if edge_fits(index, head, &edge.link, tail) {
            Some(ViolationKind::Flipped)
        } else {
            Some(ViolationKind::Invalid)
        };
        if let Some(kind) = kind {
            violations.push(Violation { edge: Some(i), node: None, kind });
        }
    }
    ValidationReport { violations }
}

/// Reverses flipped edges and removes invalid ones. Nodes are kept, even
/// when left isolated. Fails when any class or link does not resolve.
pub fn correct_graph(g: &PrototypeGraph, index: &OntologyIndex) -> Result<PrototypeGraph, GraphError> {
    for node in g.nodes() {
        if index.class(&node.class).is_none() {
            return Err(GraphError::Unresolved { kind: "class", iri: node.class.clone() });
        }
    }
    for edge in g.edges() {
        if index.link(&edge.link).is_none() {
            return Err(GraphError::Unresolved { kind: "link", iri: edge.link.clone() });
        }
    }
    let classes = g.class_of();
    let mut edges = Vec::with_capacity(g.edges().len());
    for edge in g.edges() {
        let tail = classes[edge.tail.as_str()];
        let head = classes[edge.head.as_str()];
        if edge_fits(index, tail, &edge.link, head) {
            edges.push(edge.clone());
        } else if edge_fits(index, head, &edge.link, tail) {
            edges.push(edge.reversed());
        }
    }
    PrototypeGraph::new(g.nodes().to_vec(), edges, Stage::Corrected)
}
