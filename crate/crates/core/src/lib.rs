//! Ontology-constrained natural-language query engine.
//!
//! A natural-language question is turned into a prototype graph in two
//! grammar-constrained LM passes: a free-vocabulary extraction, then a second
//! pass restricted to the classes and links retrieved by embedding
//! similarity. The result is repaired against the ontology's domain/range
//! rules and compiled to a SPARQL basic graph pattern. The [`eval`] module
//! holds the synthetic benchmark used to score that pipeline.

pub mod eval;
pub mod fixtures;
pub mod grammar;
pub mod graph;
pub mod lm;
pub mod ontology;
pub mod pipeline;
pub mod semantic;
pub mod service;

pub use graph::{correct_graph, graph_from_json, to_sparql, validate_graph, PrototypeGraph, Stage};
pub use ontology::{load_ontology, OntologyIndex};
pub use pipeline::{run_pipeline, PipelineTrace};
pub use semantic::{CandidateSet, SemanticIndex};
