//! Deterministic English rendering of a graph, used as query text that does
//! not leak anything beyond the graph itself.

use std::collections::{HashMap, HashSet};

use crate::graph::PrototypeGraph;
use crate::ontology::OntologyIndex;

const ORDINALS: [&str; 10] =
    ["first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth"];

fn ordinal(n: usize) -> String {
    match ORDINALS.get(n - 1) {
        Some(word) => word.to_string(),
        None => format!("{n}th"),
    }
}

struct Referrer<'a> {
    /// Introduced node ids per label, in order of introduction.
    introduced: HashMap<String, Vec<&'a str>>,
}

impl<'a> Referrer<'a> {
    fn refer(&mut self, id: &'a str, label: &str) -> String {
        let seen = self.introduced.entry(label.to_string()).or_default();
        match seen.iter().position(|s| *s == id) {
            None => {
                seen.push(id);
                format!("a {label}")
            }
            Some(_) if seen.len() == 1 => format!("the same {label}"),
            Some(i) => format!("the {} {label}", ordinal(i + 1)),
        }
    }
}

/// One clause per edge, `"{tail} that {link} {head}"`, joined with "and".
/// A node's first mention is "a {label}"; later mentions are "the same
/// {label}" while only one node with that label has been mentioned, and
/// "the {ordinal} {label}" (by order of first mention) otherwise. Nodes
/// without edges get a bare "a {label}" clause. Labels are lowercased and
/// fall back to the iri's local name.
pub fn template_query(g: &PrototypeGraph, index: &OntologyIndex) -> String {
    let class_label = |iri: &str| {
        index
            .class(iri)
            .map(|c| c.label.clone())
            .unwrap_or_else(|| crate::ontology::local_name(iri).to_string())
            .to_lowercase()
    };
    let link_label = |iri: &str| {
        index
            .link(iri)
            .map(|l| l.label.clone())
            .unwrap_or_else(|| crate::ontology::local_name(iri).to_string())
            .to_lowercase()
    };
    let classes = g.class_of();
    let mut r = Referrer { introduced: HashMap::new() };
    let mut clauses = Vec::new();
    let mut touched = HashSet::new();
    for e in g.edges() {
        let tail = r.refer(&e.tail, &class_label(classes[e.tail.as_str()]));
        let head = r.refer(&e.head, &class_label(classes[e.head.as_str()]));
        clauses.push(format!("{tail} that {} {head}", link_label(&e.link)));
        touched.insert(e.tail.as_str());
        touched.insert(e.head.as_str());
    }
    for n in g.nodes() {
        if !touched.contains(n.id.as_str()) {
            clauses.push(format!("a {}", class_label(&n.class)));
        }
    }
    clauses.join(" and ")
}
