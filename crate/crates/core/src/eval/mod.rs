//! Synthetic evaluation: graph sampling, query generation, scoring and
//! reference execution.

pub mod benchmark;
mod bgp;
mod ged;
mod metrics;
pub mod report;
mod sampler;
mod template;

use thiserror::Error;

pub use benchmark::{
    run_benchmark, BenchBackend, BenchmarkConfig, QueryItem, QueryOrigin, QueryOutcome, QueryRecord, ScoreReport,
    ScoreStage,
};
pub use bgp::{bgp_match, Binding, TripleSet};
pub use ged::{ged, ged_score, GED_MAX_NODES};
pub use metrics::{f1_node, f1_rel, f1_sets, multiset_overlap};
pub use sampler::{downgrade_node, sample_graph, stream_rng, SampledGraph, SamplerConfig};
pub use template::template_query;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("ontology has no links to sample from")]
    NoLinks,
    #[error("unknown class {0}")]
    UnknownClass(String),
    #[error("graph with {nodes} nodes exceeds the exact GED budget of {max}")]
    GraphTooLarge { nodes: usize, max: usize },
    #[error("parse error: {0}")]
    Parse(String),
}
