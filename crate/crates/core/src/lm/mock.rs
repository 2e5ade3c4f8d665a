//! Deterministic stand-ins for an inference server.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{BackendKind, LmBackend, LmError, LmRequest};
use crate::grammar::{sample_spec, SampleOptions};
use crate::graph::PrototypeGraph;
use crate::ontology::OntologyIndex;

/// Returns the i-th scripted completion on the i-th call, then keeps
/// repeating the last one. Records every request.
pub struct MockScripted {
    responses: Vec<String>,
    calls: AtomicUsize,
    log: Mutex<Vec<LmRequest>>,
}

impl MockScripted {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self {
            responses: responses.into_iter().map(Into::into).collect(),
            calls: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<LmRequest> {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl LmBackend for MockScripted {
    fn kind(&self) -> BackendKind {
        BackendKind::MockScripted
    }

    fn complete(&self, req: &LmRequest) -> Result<String, LmError> {
        let i = self.calls.fetch_add(1, Ordering::SeqCst);
        self.log.lock().unwrap_or_else(|e| e.into_inner()).push(req.clone());
        self.responses
            .get(i)
            .or(self.responses.last())
            .cloned()
            .ok_or_else(|| LmError::Mock("no scripted responses".into()))
    }
}

/// Answers every graph request with its attached answer graph in label form
/// and every free-text request with the graph's template query.
pub struct MockOracle {
    answer: PrototypeGraph,
    label_json: String,
    query_text: String,
}

impl MockOracle {
    pub fn new(answer: PrototypeGraph, index: &OntologyIndex) -> Self {
        let label_json = answer.to_label_json(index);
        let query_text = crate::eval::template_query(&answer, index);
        Self { answer, label_json, query_text }
    }

    pub fn answer(&self) -> &PrototypeGraph {
        &self.answer
    }
}

impl LmBackend for MockOracle {
    fn kind(&self) -> BackendKind {
        BackendKind::MockOracle
    }

    fn complete(&self, req: &LmRequest) -> Result<String, LmError> {
        Ok(match req.grammar {
            Some(_) => self.label_json.clone(),
            None => self.query_text.clone(),
        })
    }
}

/// Emits random strings from the request's grammar. Node ids are drawn from
/// a small pool so that edges usually connect existing nodes; for
/// open-vocabulary grammars class and link fields are drawn from `words`.
pub struct SamplingBackend {
    seed: u64,
    calls: AtomicU64,
    words: Vec<String>,
}

const ID_POOL: [&str; 5] = ["a", "b", "c", "d", "e"];

impl SamplingBackend {
    pub fn new(seed: u64, words: Vec<String>) -> Self {
        Self { seed, calls: AtomicU64::new(0), words }
    }

    fn quoted(items: &[impl AsRef<str>]) -> Vec<String> {
        items.iter().map(|s| serde_json::to_string(s.as_ref()).expect("string serializes")).collect()
    }
}

impl LmBackend for SamplingBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::MockSampler
    }

    fn complete(&self, req: &LmRequest) -> Result<String, LmError> {
        let Some(spec) = &req.grammar else {
            return Ok("a sampled request".into());
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.calls.fetch_add(1, Ordering::SeqCst));
        let mut overrides = HashMap::from([("string".to_string(), Self::quoted(&ID_POOL))]);
        if spec.vocab.is_none() && !self.words.is_empty() {
            let words = Self::quoted(&self.words);
            overrides.insert("class".into(), words.clone());
            overrides.insert("link".into(), words);
        }
        let opts = SampleOptions { overrides, ..Default::default() };
        Ok(sample_spec(spec, &opts, &mut rng)?)
    }
}
