//! Bundled desk-scale fixtures: a curated DBpedia ontology excerpt with
//! approximate instance counts, a two-class toy ontology, and a small
//! instance graph around the "person, child, alma mater" example.

use std::sync::OnceLock;

use crate::graph::{GraphEdge, GraphNode, PrototypeGraph, Stage};
use crate::ontology::{load_ontology, parse_count_table, OntologyIndex, OntologySource};

pub const DBPEDIA_EXCERPT_TTL: &str = include_str!("../assets/fixtures/dbpedia_excerpt.ttl");
pub const DBPEDIA_EXCERPT_COUNTS: &str = include_str!("../assets/fixtures/dbpedia_excerpt.counts.tsv");
pub const TOY_TTL: &str = include_str!("../assets/fixtures/toy.ttl");
pub const ALUMNI_TRIPLES_NT: &str = include_str!("../assets/fixtures/alumni_triples.nt");

pub const ALUMNI_QUERY: &str = "a person and the child of a person have the alma mater of the same university";

pub const DBO: &str = "http://dbpedia.org/ontology/";

/// `dbo("Person")` → `http://dbpedia.org/ontology/Person`.
pub fn dbo(local: &str) -> String {
    format!("{DBO}{local}")
}

pub fn dbpedia_excerpt() -> &'static OntologyIndex {
    static INDEX: OnceLock<OntologyIndex> = OnceLock::new();
    INDEX.get_or_init(|| {
        let counts = parse_count_table(DBPEDIA_EXCERPT_COUNTS).expect("bundled counts parse");
        load_ontology(&[OntologySource::turtle(DBPEDIA_EXCERPT_TTL)], Some(&counts)).expect("bundled ontology loads").0
    })
}

pub fn toy() -> &'static OntologyIndex {
    static INDEX: OnceLock<OntologyIndex> = OnceLock::new();
    INDEX.get_or_init(|| load_ontology(&[OntologySource::turtle(TOY_TTL)], None).expect("toy loads").0)
}

/// Two persons related by `child`, both with the same alma mater.
pub fn alumni_graph() -> PrototypeGraph {
    PrototypeGraph::new(
        vec![
            GraphNode::new("person_1", dbo("Person")),
            GraphNode::new("person_2", dbo("Person")),
            GraphNode::new("university_1", dbo("University")),
        ],
        vec![
            GraphEdge::new("person_1", dbo("child"), "person_2"),
            GraphEdge::new("person_1", dbo("almaMater"), "university_1"),
            GraphEdge::new("person_2", dbo("almaMater"), "university_1"),
        ],
        Stage::Corrected,
    )
    .expect("fixture graph is well formed")
}
