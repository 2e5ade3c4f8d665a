#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use oxigraph::io::RdfFormat;
use oxigraph::model::Term;
use oxigraph::sparql::{QueryResults, SparqlEvaluator};
use oxigraph::store::Store;
use spargebra::algebra::GraphPattern;
use spargebra::{Query, SparqlParser};

/// What a basic SELECT query means, with pattern order removed.
#[derive(Debug, PartialEq, Eq)]
pub struct QueryShape {
    pub distinct: bool,
    pub variables: Vec<String>,
    pub patterns: BTreeSet<String>,
}

fn collect(p: &GraphPattern, shape: &mut QueryShape) {
    match p {
        GraphPattern::Distinct { inner } => {
            shape.distinct = true;
            collect(inner, shape);
        }
        GraphPattern::Project { inner, variables } => {
            shape.variables = variables.iter().map(|v| v.as_str().to_string()).collect();
            collect(inner, shape);
        }
        GraphPattern::Slice { inner, .. } => collect(inner, shape),
        GraphPattern::Join { left, right } => {
            collect(left, shape);
            collect(right, shape);
        }
        GraphPattern::Bgp { patterns } => shape.patterns.extend(patterns.iter().map(|t| t.to_string())),
        other => panic!("unexpected pattern {other:?}"),
    }
}

/// Parses with the independent parser; panics on syntax errors.
pub fn query_shape(text: &str) -> QueryShape {
    let q = SparqlParser::new().parse_query(text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    let Query::Select { pattern, .. } = q else { panic!("not a SELECT") };
    let mut shape = QueryShape { distinct: false, variables: Vec::new(), patterns: BTreeSet::new() };
    collect(&pattern, &mut shape);
    shape
}

fn term_id(t: &Term) -> String {
    match t {
        Term::NamedNode(n) => n.as_str().to_string(),
        Term::BlankNode(b) => format!("_:{}", b.as_str()),
        other => other.to_string(),
    }
}

pub fn store_from_ntriples(nt: &str) -> Store {
    let store = Store::new().unwrap();
    store.load_from_reader(RdfFormat::NTriples, nt.as_bytes()).unwrap();
    store
}

/// Solutions of `query` over `store` as variable → term id maps.
pub fn solutions(store: &Store, query: &str) -> BTreeSet<BTreeMap<String, String>> {
    let prepared = SparqlEvaluator::new().parse_query(query).unwrap();
    let QueryResults::Solutions(sols) = prepared.on_store(store).execute().unwrap() else { panic!("not a SELECT") };
    sols.map(|s| {
        let s = s.unwrap();
        s.iter().map(|(v, t)| (v.as_str().to_string(), term_id(t))).collect()
    })
    .collect()
}

/// Expected SPARQL for the alumni example graph.
pub const ALUMNI_SPARQL: &str = "SELECT DISTINCT ?person_1 ?person_2 ?university_1 WHERE {
    ?person_1 <http://dbpedia.org/ontology/child> ?person_2.
    ?person_1 <http://dbpedia.org/ontology/almaMater> ?university_1.
    ?person_2 <http://dbpedia.org/ontology/almaMater> ?university_1.
    ?person_1 a <http://dbpedia.org/ontology/Person>.
    ?person_2 a <http://dbpedia.org/ontology/Person>.
    ?university_1 a <http://dbpedia.org/ontology/University>.
}";
