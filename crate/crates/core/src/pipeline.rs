//! The staged extraction run: raw graph, candidate retrieval, constrained
//! graph, correction. Every intermediate result is kept in the trace.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::{correct_graph, validate_graph, GraphError, PrototypeGraph, ValidationReport};
use crate::lm::{extract_constrained, extract_raw, prompts, LmBackend, LmError, LmSettings};
use crate::ontology::OntologyIndex;
use crate::semantic::{CandidateSet, SemanticError, SemanticIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineStage {
    Raw,
    Candidates,
    Constrained,
    Correction,
}

impl PipelineStage {
    pub fn as_str(self) -> &'static str {
        match self {
            PipelineStage::Raw => "raw",
            PipelineStage::Candidates => "candidates",
            PipelineStage::Constrained => "constrained",
            PipelineStage::Correction => "correction",
        }
    }
}

impl fmt::Display for PipelineStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum StageFailure {
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Semantic(#[from] SemanticError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("no candidate classes retrieved")]
    NoCandidateClasses,
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {failure}")]
pub struct PipelineError {
    pub stage: PipelineStage,
    pub failure: StageFailure,
}

impl PipelineError {
    fn at(stage: PipelineStage, failure: impl Into<StageFailure>) -> Self {
        Self { stage, failure: failure.into() }
    }

    /// True when the caller's input is at fault rather than a backend.
    pub fn is_input_error(&self) -> bool {
        matches!(self.failure, StageFailure::Lm(LmError::EmptyQuery))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    Ok,
    /// The first pass produced no nodes; later stages were skipped.
    NoGraph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub input_query: String,
    pub status: TraceStatus,
    pub k: usize,
    pub raw_graph: PrototypeGraph,
    pub candidate_set: Option<CandidateSet>,
    pub constrained_graph: Option<PrototypeGraph>,
    pub corrected_graph: Option<PrototypeGraph>,
    /// Violations of the constrained graph before correction.
    pub corrections: Option<ValidationReport>,
    /// Wall-clock milliseconds per stage.
    pub timings: BTreeMap<PipelineStage, f64>,
    pub config_hash: String,
}

/// Digest of everything besides the query that determines a run's output.
pub fn config_hash(index: &OntologyIndex, sidx: &SemanticIndex, k: usize, settings: &LmSettings) -> String {
    let mut h = Sha256::new();
    h.update(prompts::prompt_hash());
    h.update(index.content_hash());
    h.update(sidx.model_id());
    h.update(k.to_le_bytes());
    h.update(serde_json::to_vec(settings).expect("settings serialize"));
    hex::encode(h.finalize())
}

fn timed<T>(timings: &mut BTreeMap<PipelineStage, f64>, stage: PipelineStage, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    timings.insert(stage, start.elapsed().as_secs_f64() * 1e3);
    out
}

pub fn run_pipeline(
    query: &str,
    index: &OntologyIndex,
    sidx: &SemanticIndex,
    backend: &dyn LmBackend,
    k: usize,
    settings: &LmSettings,
) -> Result<PipelineTrace, PipelineError> {
    use PipelineStage::*;
    let mut timings = BTreeMap::new();

    let raw =
        timed(&mut timings, Raw, || extract_raw(query, backend, settings)).map_err(|e| PipelineError::at(Raw, e))?;
    let mut trace = PipelineTrace {
        input_query: query.to_string(),
        status: TraceStatus::NoGraph,
        k,
        raw_graph: raw,
        candidate_set: None,
        constrained_graph: None,
        corrected_graph: None,
        corrections: None,
        timings: BTreeMap::new(),
        config_hash: config_hash(index, sidx, k, settings),
    };
    if trace.raw_graph.is_empty() {
        trace.timings = timings;
        return Ok(trace);
    }

    let candidates = timed(&mut timings, Candidates, || sidx.candidates_for_graph(&trace.raw_graph, k, index))
        .map_err(|e| PipelineError::at(Candidates, e))?;
    if candidates.classes.is_empty() {
        return Err(PipelineError::at(Candidates, StageFailure::NoCandidateClasses));
    }

    let constrained =
        timed(&mut timings, Constrained, || extract_constrained(query, &candidates, backend, index, settings))
            .map_err(|e| PipelineError::at(Constrained, e))?;

    let (report, corrected) =
        timed(&mut timings, Correction, || (validate_graph(&constrained, index), correct_graph(&constrained, index)));
    let corrected = corrected.map_err(|e| PipelineError::at(Correction, e))?;

    trace.status = TraceStatus::Ok;
    trace.candidate_set = Some(candidates);
    trace.constrained_graph = Some(constrained);
    trace.corrected_graph = Some(corrected);
    trace.corrections = Some(report);
    trace.timings = timings;
    Ok(trace)
}
