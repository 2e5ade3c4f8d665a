//! Synthetic benchmark: sample graphs, turn them into queries, run the
//! pipeline and score both the raw and the corrected output against the
//! sampled graph.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampler::{sample_graph, stream_rng, SamplerConfig};
use super::{f1_node, f1_rel, ged_score, template_query, EvalError};
use crate::graph::{graph_from_json, PrototypeGraph, Stage};
use crate::lm::{generate_query_text, prompts, LmBackend, LmSettings, MockOracle};
use crate::ontology::OntologyIndex;
use crate::pipeline::run_pipeline;
use crate::semantic::SemanticIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreStage {
    /// First-pass output, labels aligned to iris by exact label match.
    Raw,
    /// Corrected output of the full pipeline.
    Aligned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryOrigin {
    Templated,
    Lm,
    /// JSON lines of `{graph, query_text, origin}`, read by the caller.
    File,
}

/// One query of a file-based query set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryItem {
    pub graph: PrototypeGraph,
    pub query_text: String,
    pub origin: String,
}

pub fn parse_query_file(text: &str) -> Result<Vec<QueryItem>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| EvalError::Parse(format!("query file line {}: {e}", i + 1))))
        .collect()
}

pub enum BenchBackend<'a> {
    /// A fresh oracle per query, answering with the query's truth graph.
    Oracle,
    Shared(&'a dyn LmBackend),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    /// Node counts of the sampled graphs (`max_nodes` per group).
    pub k_values: Vec<usize>,
    pub queries_per_k: usize,
    pub origin: QueryOrigin,
    pub seed: u64,
    pub sampler: SamplerConfig,
    /// Retrieval width of the pipeline.
    pub retrieval_k: usize,
    pub model: String,
    pub ontology: String,
    pub lm: LmSettings,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            k_values: vec![2, 3, 5, 7],
            queries_per_k: 128,
            origin: QueryOrigin::Templated,
            seed: 42,
            sampler: SamplerConfig::default(),
            retrieval_k: crate::semantic::DEFAULT_K,
            model: "mock".into(),
            ontology: "fixture".into(),
            lm: LmSettings::default(),
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query_id: String,
    pub k: usize,
    pub model: String,
    pub ontology: String,
    pub origin: String,
    pub stage: ScoreStage,
    pub query_text: String,
    pub f1_node: f64,
    pub f1_rel: f64,
    pub ged_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryFailure {
    pub query_id: String,
    pub k: usize,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum QueryOutcome {
    Scored { records: Vec<QueryRecord> },
    Failed(QueryFailure),
}

impl QueryOutcome {
    pub fn query_id(&self) -> &str {
        match self {
            QueryOutcome::Scored { records } => &records[0].query_id,
            QueryOutcome::Failed(f) => &f.query_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub k: usize,
    pub model: String,
    pub ontology: String,
    pub origin: String,
    pub stage: ScoreStage,
    pub n: usize,
    pub f1_node: f64,
    pub f1_rel: f64,
    pub ged_s: f64,
}

/// Published scores of a 3B-parameter model on DBpedia with one-shot
/// prompting, kept next to results for orientation only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub k: usize,
    pub origin: String,
    pub stage: ScoreStage,
    pub f1_node: f64,
    pub ged_s: f64,
}

pub fn reference_points() -> Vec<ReferencePoint> {
    let rows = [
        (3, "human", 0.63, 0.53, 0.71, 0.53),
        (3, "lm", 0.71, 0.49, 0.71, 0.34),
        (3, "templated", 0.81, 0.55, 0.81, 0.53),
        (5, "human", 0.75, 0.52, 0.77, 0.24),
        (5, "lm", 0.71, 0.41, 0.73, 0.26),
        (5, "templated", 0.79, 0.48, 0.78, 0.46),
    ];
    rows.iter()
        .flat_map(|&(k, origin, af, ag, rf, rg)| {
            [
                ReferencePoint { k, origin: origin.into(), stage: ScoreStage::Aligned, f1_node: af, ged_s: ag },
                ReferencePoint { k, origin: origin.into(), stage: ScoreStage::Raw, f1_node: rf, ged_s: rg },
            ]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub records: Vec<QueryRecord>,
    pub failures: Vec<QueryFailure>,
    pub aggregates: Vec<Aggregate>,
    pub references: Vec<ReferencePoint>,
    pub prompt_hash: String,
    pub seed: u64,
}

/// Arithmetic means grouped by (k, model, ontology, origin, stage).
pub fn aggregate(records: &[QueryRecord]) -> Vec<Aggregate> {
    type Key = (usize, String, String, String, ScoreStage);
    let mut groups: BTreeMap<Key, Vec<&QueryRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.k, r.model.clone(), r.ontology.clone(), r.origin.clone(), r.stage)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((k, model, ontology, origin, stage), rs)| {
            let mean = |f: fn(&QueryRecord) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / rs.len() as f64;
            Aggregate {
                k,
                model,
                ontology,
                origin,
                stage,
                n: rs.len(),
                f1_node: mean(|r| r.f1_node),
                f1_rel: mean(|r| r.f1_rel),
                ged_s: mean(|r| r.ged_s),
            }
        })
        .collect()
}

/// Maps free-text classes and links to iris by case-insensitive label
/// match; unmatched text is kept and therefore scores as a miss.
pub fn align_raw(g: &PrototypeGraph, index: &OntologyIndex) -> PrototypeGraph {
    g.map_terms(
        |c| index.classes_with_label(c.trim()).first().cloned().unwrap_or_else(|| c.to_string()),
        |l| index.links_with_label(l.trim()).first().cloned().unwrap_or_else(|| l.to_string()),
    )
}

struct WorkItem {
    id: String,
    k: usize,
    truth: PrototypeGraph,
    origin: String,
    query: Option<String>,
}

fn origin_tag(origin: &QueryOrigin) -> &'static str {
    match origin {
        QueryOrigin::Templated => "templated",
        QueryOrigin::Lm => "lm",
        QueryOrigin::File => "file",
    }
}

fn score(
    item: &WorkItem,
    query: &str,
    stage: ScoreStage,
    predicted: &PrototypeGraph,
    cfg: &BenchmarkConfig,
) -> Result<QueryRecord, EvalError> {
    Ok(QueryRecord {
        query_id: item.id.clone(),
        k: item.k,
        model: cfg.model.clone(),
        ontology: cfg.ontology.clone(),
        origin: item.origin.clone(),
        stage,
        query_text: query.to_string(),
        f1_node: f1_node(predicted, &item.truth),
        f1_rel: f1_rel(predicted, &item.truth),
        ged_s: ged_score(predicted, &item.truth)?,
    })
}

fn run_item(
    item: &WorkItem,
    index: &OntologyIndex,
    sidx: &SemanticIndex,
    backend: &BenchBackend<'_>,
    cfg: &BenchmarkConfig,
) -> QueryOutcome {
    let oracle;
    let lm: &dyn LmBackend = match backend {
        BenchBackend::Oracle => {
            oracle = MockOracle::new(item.truth.clone(), index);
            &oracle
        }
        BenchBackend::Shared(b) => *b,
    };
    let fail = |stage: &str, message: String| {
        QueryOutcome::Failed(QueryFailure { query_id: item.id.clone(), k: item.k, stage: stage.into(), message })
    };

    let query = match &item.query {
        Some(q) => q.clone(),
        None => match generate_query_text(&item.truth, lm, &cfg.lm) {
            Ok(q) => q,
            Err(e) => return fail("query_generation", e.to_string()),
        },
    };
    let trace = match run_pipeline(&query, index, sidx, lm, cfg.retrieval_k, &cfg.lm) {
        Ok(t) => t,
        Err(e) => return fail(e.stage.as_str(), e.failure.to_string()),
    };
    let raw = align_raw(&trace.raw_graph, index);
    let corrected = trace.corrected_graph.clone().unwrap_or_else(|| PrototypeGraph::empty(Stage::Corrected));
    let records = [(ScoreStage::Raw, &raw), (ScoreStage::Aligned, &corrected)]
        .into_iter()
        .map(|(stage, g)| score(item, &query, stage, g, cfg))
        .collect::<Result<Vec<_>, _>>();
    match records {
        Ok(records) => QueryOutcome::Scored { records },
        Err(e) => fail("scoring", e.to_string()),
    }
}

fn work_items(
    index: &OntologyIndex,
    cfg: &BenchmarkConfig,
    file_items: Option<&[QueryItem]>,
) -> Result<Vec<WorkItem>, EvalError> {
    if let Some(items) = file_items {
        return Ok(items
            .iter()
            .enumerate()
            .map(|(i, q)| WorkItem {
                id: format!("{}-{i}", q.origin),
                k: q.graph.nodes().len(),
                truth: q.graph.clone().with_stage(Stage::Sampled),
                origin: q.origin.clone(),
                query: Some(q.query_text.clone()),
            })
            .collect());
    }
    let mut out = Vec::new();
    for &k in &cfg.k_values {
        let sampler = SamplerConfig { max_nodes: k, rng_seed: cfg.seed, ..cfg.sampler.clone() };
        for i in 0..cfg.queries_per_k {
            // one stream per (k, index) pair
            let mut rng = stream_rng(cfg.seed, ((k as u64) << 32) | i as u64);
            let truth = sample_graph(index, &sampler, &mut rng)?.graph;
            let query = match cfg.origin {
                QueryOrigin::Templated => Some(template_query(&truth, index)),
                _ => None,
            };
            out.push(WorkItem {
                id: format!("{}-k{k}-{i}", origin_tag(&cfg.origin)),
                k,
                truth,
                origin: origin_tag(&cfg.origin).into(),
                query,
            });
        }
    }
    Ok(out)
}

/// Runs every work item not already present in `done` and returns the
/// combined report. `on_outcome` sees each new outcome as it completes, for
/// incremental persistence.
pub fn run_benchmark(
    index: &OntologyIndex,
    sidx: &SemanticIndex,
    backend: BenchBackend<'_>,
    cfg: &BenchmarkConfig,
    file_items: Option<&[QueryItem]>,
    done: Vec<QueryOutcome>,
    on_outcome: &(dyn Fn(&QueryOutcome) + Sync),
) -> Result<ScoreReport, EvalError> {
    let items = work_items(index, cfg, file_items)?;
    let finished: HashSet<String> =
        done.iter().filter(|o| matches!(o, QueryOutcome::Scored { .. })).map(|o| o.query_id().to_string()).collect();
    let todo: Vec<&WorkItem> = items.iter().filter(|it| !finished.contains(&it.id)).collect();

    let run = || -> Vec<QueryOutcome> {
        todo.par_iter()
            .map(|item| {
                let outcome = run_item(item, index, sidx, &backend, cfg);
                on_outcome(&outcome);
                outcome
            })
            .collect()
    };
    let fresh = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| EvalError::Parse(e.to_string()))?
            .install(run),
        None => run(),
    };

    let order: BTreeMap<&str, usize> = items.iter().enumerate().map(|(i, it)| (it.id.as_str(), i)).collect();
    let mut outcomes: BTreeMap<usize, QueryOutcome> = BTreeMap::new();
    for o in done.into_iter().filter(|o| finished.contains(o.query_id())).chain(fresh) {
        if let Some(&i) = order.get(o.query_id()) {
            outcomes.insert(i, o);
        }
    }

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes.into_values() {
        match o {
            QueryOutcome::Scored { records: r } => records.extend(r),
            QueryOutcome::Failed(f) => failures.push(f),
        }
    }
    Ok(ScoreReport {
        aggregates: aggregate(&records),
        records,
        failures,
        references: reference_points(),
        prompt_hash: prompts::prompt_hash(),
        seed: cfg.seed,
    })
}

/// Reads a graph file that holds either one graph JSON document or one per
/// line.
pub fn read_graphs(text: &str, stage: Stage) -> Result<Vec<PrototypeGraph>, EvalError> {
    let parse = |s: &str| graph_from_json(s, stage).map(|(g, _)| g).map_err(|e| EvalError::Parse(e.to_string()));
    if let Ok(g) = parse(text) {
        return Ok(vec![g]);
    }
    text.lines().filter(|l| !l.trim().is_empty()).map(parse).collect()
}

#[cfg(test)]
mod tests {
    use std::sync::{Arc, Mutex};

    use super::*;
    use crate::fixtures;
    use crate::lm::MockScripted;
    use crate::semantic::HashEmbedder;

    fn sidx() -> SemanticIndex {
        SemanticIndex::build(fixtures::dbpedia_excerpt(), Arc::new(HashEmbedder::default()), None).unwrap()
    }

    fn small_cfg() -> BenchmarkConfig {
        BenchmarkConfig { k_values: vec![2, 3], queries_per_k: 6, threads: Some(2), ..Default::default() }
    }

    #[test]
    fn oracle_scores_one_everywhere() {
        let idx = fixtures::dbpedia_excerpt();
        let report = run_benchmark(idx, &sidx(), BenchBackend::Oracle, &small_cfg(), None, vec![], &|_| {}).unwrap();
        assert!(report.failures.is_empty(), "{:?}", report.failures);
        assert_eq!(report.records.len(), 2 * 6 * 2);
        for a in report.aggregates.iter().filter(|a| a.stage == ScoreStage::Aligned) {
            assert_eq!((a.f1_node, a.f1_rel, a.ged_s), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn failures_are_counted_not_averaged() {
        let idx = fixtures::dbpedia_excerpt();
        let backend = MockScripted::new(["garbage"]);
        let report =
            run_benchmark(idx, &sidx(), BenchBackend::Shared(&backend), &small_cfg(), None, vec![], &|_| {}).unwrap();
        assert_eq!(report.failures.len(), 12);
        assert!(report.aggregates.is_empty());
        assert!(report.failures.iter().all(|f| f.stage == "raw"));
    }

    #[test]
    fn resume_skips_finished_items() {
        let idx = fixtures::dbpedia_excerpt();
        let cfg = small_cfg();
        let seen = Mutex::new(Vec::new());
        let first = run_benchmark(idx, &sidx(), BenchBackend::Oracle, &cfg, None, vec![], &|o| {
            seen.lock().unwrap().push(o.clone())
        })
        .unwrap();
        let mut done = seen.into_inner().unwrap();
        done.truncate(5);
        let calls = Mutex::new(0);
        let second =
            run_benchmark(idx, &sidx(), BenchBackend::Oracle, &cfg, None, done, &|_| *calls.lock().unwrap() += 1)
                .unwrap();
        assert_eq!(*calls.lock().unwrap(), 7);
        assert_eq!(first, second);
    }

    #[test]
    fn file_origin_keeps_tags() {
        let idx = fixtures::dbpedia_excerpt();
        let item = QueryItem {
            graph: fixtures::alumni_graph(),
            query_text: fixtures::ALUMNI_QUERY.into(),
            origin: "human".into(),
        };
        let text = serde_json::to_string(&item).unwrap();
        let items = parse_query_file(&format!("{text}\n\n{text}\n")).unwrap();
        let report =
            run_benchmark(idx, &sidx(), BenchBackend::Oracle, &small_cfg(), Some(&items), vec![], &|_| {}).unwrap();
        assert_eq!(report.aggregates.len(), 2);
        assert!(report.aggregates.iter().all(|a| a.origin == "human" && a.k == 3 && a.n == 2));
    }

    #[test]
    fn raw_alignment_is_case_insensitive() {
        let idx = fixtures::dbpedia_excerpt();
        let raw = fixtures::alumni_graph()
            .map_terms(|c| idx.class(c).unwrap().label.to_uppercase(), |l| idx.link(l).unwrap().label.clone());
        assert_eq!(align_raw(&raw, idx), fixtures::alumni_graph());
    }
}
