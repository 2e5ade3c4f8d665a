//! Brute-force basic graph pattern matching over a small in-memory triple
//! set. This is the reference semantics for executing a prototype graph.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use oxrdf::{NamedOrBlankNode, Term};
use oxttl::NTriplesParser;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::graph::PrototypeGraph;
use crate::ontology::OntologyIndex;

const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

/// Node id to object identifier.
pub type Binding = BTreeMap<String, String>;

/// Predicate triples between objects plus their asserted types. Objects are
/// iris, or `_:label` for blank nodes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleSet {
    pub triples: BTreeSet<(String, String, String)>,
    pub types: BTreeMap<String, BTreeSet<String>>,
}

fn subject_id(s: &NamedOrBlankNode) -> String {
    match s {
        NamedOrBlankNode::NamedNode(n) => n.as_str().to_string(),
        NamedOrBlankNode::BlankNode(b) => format!("_:{}", b.as_str()),
    }
}

fn term_id(t: &Term) -> Option<String> {
    match t {
        Term::NamedNode(n) => Some(n.as_str().to_string()),
        Term::BlankNode(b) => Some(format!("_:{}", b.as_str())),
        _ => None,
    }
}

fn write_id(out: &mut String, id: &str) {
    if id.starts_with("_:") {
        out.push_str(id);
    } else {
        let _ = write!(out, "<{id}>");
    }
}

impl TripleSet {
    /// Reads N-Triples; `rdf:type` statements become type assertions and
    /// statements with literal objects are ignored.
    pub fn from_ntriples(text: &str) -> Result<Self, EvalError> {
        let mut set = TripleSet::default();
        for triple in NTriplesParser::new().for_slice(text.as_bytes()) {
            let t = triple.map_err(|e| EvalError::Parse(e.to_string()))?;
            let Some(o) = term_id(&t.object) else { continue };
            let s = subject_id(&t.subject);
            if t.predicate.as_str() == RDF_TYPE {
                set.types.entry(s).or_default().insert(o);
            } else {
                set.triples.insert((s, t.predicate.as_str().to_string(), o));
            }
        }
        Ok(set)
    }

    pub fn objects(&self) -> BTreeSet<&str> {
        let mut out: BTreeSet<&str> = self.types.keys().map(String::as_str).collect();
        for (s, _, o) in &self.triples {
            out.insert(s);
            out.insert(o);
        }
        out
    }

    /// N-Triples with every asserted type expanded to all its superclasses,
    /// so a plain `?x a C` pattern matches instances of subclasses of `C`.
    pub fn to_ntriples_with_supertypes(&self, index: &OntologyIndex) -> String {
        let mut out = String::new();
        for (s, p, o) in &self.triples {
            write_id(&mut out, s);
            let _ = write!(out, " <{p}> ");
            write_id(&mut out, o);
            out.push_str(" .\n");
        }
        for (obj, types) in &self.types {
            let mut all = BTreeSet::new();
            for t in types {
                all.insert(t.clone());
                if let Some(anc) = index.ancestors(t) {
                    all.extend(anc.iter().cloned());
                }
            }
            for t in all {
                write_id(&mut out, obj);
                let _ = writeln!(out, " <{RDF_TYPE}> <{t}> .");
            }
        }
        out
    }

    fn has_type_within(&self, obj: &str, class: &str, index: &OntologyIndex) -> bool {
        self.types
            .get(obj)
            .is_some_and(|ts| ts.iter().any(|t| t == class || index.ancestors(t).is_some_and(|a| a.contains(class))))
    }
}

/// Every assignment of objects to nodes (not necessarily distinct) such that
/// each object has a type that is a subtype of its node's class and each
/// edge is present as a triple.
pub fn bgp_match(g: &PrototypeGraph, data: &TripleSet, index: &OntologyIndex) -> BTreeSet<Binding> {
    let objects = data.objects();
    let candidates: Vec<Vec<&str>> = g
        .nodes()
        .iter()
        .map(|n| objects.iter().copied().filter(|o| data.has_type_within(o, &n.class, index)).collect())
        .collect();
    let pos: BTreeMap<&str, usize> = g.nodes().iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
    let edges: Vec<(usize, &str, usize)> =
        g.edges().iter().map(|e| (pos[e.tail.as_str()], e.link.as_str(), pos[e.head.as_str()])).collect();
    let facts: HashSet<(&str, &str, &str)> =
        data.triples.iter().map(|(s, p, o)| (s.as_str(), p.as_str(), o.as_str())).collect();

    let mut out = BTreeSet::new();
    let mut current: Vec<&str> = Vec::with_capacity(g.nodes().len());
    extend(g, &candidates, &edges, &facts, &mut current, &mut out);
    out
}

fn extend<'a>(
    g: &PrototypeGraph,
    candidates: &[Vec<&'a str>],
    edges: &[(usize, &str, usize)],
    facts: &HashSet<(&str, &str, &str)>,
    current: &mut Vec<&'a str>,
    out: &mut BTreeSet<Binding>,
) {
    let i = current.len();
    if i == candidates.len() {
        out.insert(g.nodes().iter().zip(current.iter()).map(|(n, o)| (n.id.clone(), o.to_string())).collect());
        return;
    }
    for &obj in &candidates[i] {
        current.push(obj);
        // check edges whose endpoints are now all assigned and include i
        let ok = edges
            .iter()
            .filter(|(t, _, h)| (*t == i || *h == i) && *t <= i && *h <= i)
            .all(|(t, l, h)| facts.contains(&(current[*t], *l, current[*h])));
        if ok {
            extend(g, candidates, edges, facts, current, out);
        }
        current.pop();
    }
}
