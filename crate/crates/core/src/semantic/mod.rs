//! Embedding-based retrieval of candidate classes and links.

mod cache;
mod embed;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{PrototypeGraph, Stage};
use crate::ontology::OntologyIndex;

pub use cache::{cache_path, read_cache, write_cache, CacheHeader};
pub use embed::{Embedder, HashEmbedder, HttpEmbedder};

pub const DEFAULT_K: usize = 8;

#[derive(Debug, Error)]
pub enum SemanticError {
    #[error("embedding endpoint unreachable: {0}")]
    Transport(String),
    #[error("embedding endpoint returned HTTP {0}")]
    Status(u16),
    #[error("unexpected embedding response: {0}")]
    Protocol(String),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding for `{0}` has zero norm or non-finite values")]
    DegenerateVector(String),
    #[error("no {0} in the semantic index")]
    EmptyIndex(ItemKind),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("expected a raw graph, got {0:?}")]
    WrongStage(Stage),
    #[error("cache io: {0}")]
    Cache(String),
}

impl SemanticError {
    /// Transport failures, 429 and 5xx are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            SemanticError::Transport(_) => true,
            SemanticError::Status(code) => *code == 429 || *code >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Classes,
    Links,
}

impl std::fmt::Display for ItemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ItemKind::Classes => "classes",
            ItemKind::Links => "links",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub iri: String,
    pub label: String,
    pub score: f32,
}

/// Restricted vocabularies: classes and links ordered by descending
/// similarity (ties by iri), without duplicates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub classes: Vec<ScoredItem>,
    pub links: Vec<ScoredItem>,
}

impl CandidateSet {
    pub fn class_iris(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().map(|c| c.iri.as_str())
    }

    pub fn link_iris(&self) -> impl Iterator<Item = &str> {
        self.links.iter().map(|c| c.iri.as_str())
    }
}

pub fn cosine(a: &[f32], b: &[f32]) -> f32 {
    let (mut dot, mut na, mut nb) = (0f64, 0f64, 0f64);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (f64::from(*x), f64::from(*y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0) as f32
}

fn norm_ok(v: &[f32]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.iter().any(|x| *x != 0.0)
}

#[derive(Debug, Clone)]
struct Entry {
    iri: String,
    label: String,
    vector: Vec<f32>,
}

/// Stored vectors for every class and link of one ontology, plus the
/// embedder used to embed queries against them.
#[derive(Clone)]
pub struct SemanticIndex {
    model_id: String,
    dim: usize,
    classes: Vec<Entry>,
    links: Vec<Entry>,
    embedder: Arc<dyn Embedder>,
}

impl std::fmt::Debug for SemanticIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SemanticIndex")
            .field("model_id", &self.model_id)
            .field("dim", &self.dim)
            .field("classes", &self.classes.len())
            .field("links", &self.links.len())
            .finish()
    }
}

fn check_vectors(iris: &[String], vectors: &[Vec<f32>], dim: &mut Option<usize>) -> Result<(), SemanticError> {
    if iris.len() != vectors.len() {
        return Err(SemanticError::Protocol(format!("expected {} vectors, got {}", iris.len(), vectors.len())));
    }
    for (iri, v) in iris.iter().zip(vectors) {
        match *dim {
            None => *dim = Some(v.len()),
            Some(d) if d != v.len() => return Err(SemanticError::DimensionMismatch { expected: d, got: v.len() }),
            _ => {}
        }
        if !norm_ok(v) {
            return Err(SemanticError::DegenerateVector(iri.clone()));
        }
    }
    Ok(())
}

impl SemanticIndex {
    /// Embeds `describe()` of every class and link. With `cache_dir`, vectors
    /// are read from / written to a file keyed by ontology hash and model id,
    /// so an unchanged ontology is never re-embedded.
    pub fn build(
        index: &OntologyIndex,
        embedder: Arc<dyn Embedder>,
        cache_dir: Option<&Path>,
    ) -> Result<Self, SemanticError> {
        let class_iris: Vec<String> = index.classes().map(|c| c.iri.clone()).collect();
        let link_iris: Vec<String> = index.links().map(|l| l.iri.clone()).collect();
        let hash = index.content_hash();

        let cached = match cache_dir {
            Some(dir) => {
                let path = cache_path(dir, &hash, embedder.model_id());
                read_cache(&path).ok().filter(|(h, _)| {
                    h.ontology_hash == hash
                        && h.model == embedder.model_id()
                        && h.classes == class_iris
                        && h.links == link_iris
                })
            }
            None => None,
        };

        let (class_vecs, link_vecs) = match cached {
            Some((header, mut vectors)) => {
                let links = vectors.split_off(header.classes.len());
                (vectors, links)
            }
            None => {
                let describe = |iri: &String| index.describe(iri).expect("iri from index");
                let class_texts: Vec<String> = class_iris.iter().map(describe).collect();
                let link_texts: Vec<String> = link_iris.iter().map(describe).collect();
                let class_vecs = embedder.embed(&class_texts)?;
                let link_vecs = if link_texts.is_empty() { Vec::new() } else { embedder.embed(&link_texts)? };
                (class_vecs, link_vecs)
            }
        };

        let mut dim = None;
        check_vectors(&class_iris, &class_vecs, &mut dim)?;
        check_vectors(&link_iris, &link_vecs, &mut dim)?;
        let dim = dim.unwrap_or(0);

        if let Some(dir) = cache_dir {
            let path = cache_path(dir, &hash, embedder.model_id());
            if !path.exists() {
                let header = CacheHeader {
                    format: 1,
                    model: embedder.model_id().to_string(),
                    ontology_hash: hash.clone(),
                    dim,
                    classes: class_iris.clone(),
                    links: link_iris.clone(),
                };
                let all: Vec<&[f32]> = class_vecs.iter().chain(&link_vecs).map(Vec::as_slice).collect();
                write_cache(&path, &header, &all)?;
            }
        }

        let entries = |iris: Vec<String>, vecs: Vec<Vec<f32>>, label: &dyn Fn(&str) -> String| {
            iris.into_iter()
                .zip(vecs)
                .map(|(iri, vector)| Entry { label: label(&iri), iri, vector })
                .collect::<Vec<_>>()
        };
        Ok(Self {
            model_id: embedder.model_id().to_string(),
            dim,
            classes: entries(class_iris, class_vecs, &|i| index.class(i).unwrap().label.clone()),
            links: entries(link_iris, link_vecs, &|i| index.link(i).unwrap().label.clone()),
            embedder,
        })
    }

    /// Assembles an index from precomputed `(iri, label, vector)` rows.
    pub fn from_vectors(
        embedder: Arc<dyn Embedder>,
        classes: Vec<(String, String, Vec<f32>)>,
        links: Vec<(String, String, Vec<f32>)>,
    ) -> Result<Self, SemanticError> {
        let mut dim = None;
        let split = |rows: Vec<(String, String, Vec<f32>)>| {
            let iris: Vec<String> = rows.iter().map(|r| r.0.clone()).collect();
            let vecs: Vec<Vec<f32>> = rows.iter().map(|r| r.2.clone()).collect();
            (iris, vecs, rows)
        };
        let (ci, cv, crows) = split(classes);
        let (li, lv, lrows) = split(links);
        check_vectors(&ci, &cv, &mut dim)?;
        check_vectors(&li, &lv, &mut dim)?;
        let to_entries = |rows: Vec<(String, String, Vec<f32>)>| {
            rows.into_iter().map(|(iri, label, vector)| Entry { iri, label, vector }).collect()
        };
        Ok(Self {
            model_id: embedder.model_id().to_string(),
            dim: dim.unwrap_or(0),
            classes: to_entries(crows),
            links: to_entries(lrows),
            embedder,
        })
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self, kind: ItemKind) -> usize {
        self.entries(kind).len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty() && self.links.is_empty()
    }

    fn entries(&self, kind: ItemKind) -> &[Entry] {
        match kind {
            ItemKind::Classes => &self.classes,
            ItemKind::Links => &self.links,
        }
    }

    fn vector_of(&self, kind: ItemKind, iri: &str) -> Option<&[f32]> {
        self.entries(kind).iter().find(|e| e.iri == iri).map(|e| e.vector.as_slice())
    }

    pub fn embed_query(&self, text: &str) -> Result<Vec<f32>, SemanticError> {
        let mut out = self.embedder.embed(&[text.to_string()])?;
        let v = out.pop().ok_or_else(|| SemanticError::Protocol("no query vector".into()))?;
        if self.dim != 0 && v.len() != self.dim {
            return Err(SemanticError::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        Ok(v)
    }

    /// The `k` items of `kind` most similar to `query_text`, best first,
    /// ties broken by iri.
    pub fn top_k(&self, query_text: &str, kind: ItemKind, k: usize) -> Result<Vec<ScoredItem>, SemanticError> {
        if k == 0 {
            return Err(SemanticError::InvalidK);
        }
        if self.entries(kind).is_empty() {
            return Err(SemanticError::EmptyIndex(kind));
        }
        let query = self.embed_query(query_text)?;
        Ok(self.top_k_vector(&query, kind, k))
    }

    pub fn top_k_vector(&self, query: &[f32], kind: ItemKind, k: usize) -> Vec<ScoredItem> {
        let mut scored: Vec<ScoredItem> = self
            .entries(kind)
            .iter()
            .map(|e| ScoredItem { iri: e.iri.clone(), label: e.label.clone(), score: cosine(query, &e.vector) })
            .collect();
        scored.sort_by(rank_order);
        scored.truncate(k);
        scored
    }

    /// Union of per-node class retrievals and per-edge link retrievals over a
    /// raw graph. Each retrieved link also contributes its domain and range
    /// classes, so that every allowed link can be typed at both ends; those
    /// classes are scored by their best similarity to any raw node.
    pub fn candidates_for_graph(
        &self,
        g: &PrototypeGraph,
        k: usize,
        index: &OntologyIndex,
    ) -> Result<CandidateSet, SemanticError> {
        if g.stage() != Stage::Raw {
            return Err(SemanticError::WrongStage(g.stage()));
        }
        if k == 0 {
            return Err(SemanticError::InvalidK);
        }
        if !g.nodes().is_empty() && self.classes.is_empty() {
            return Err(SemanticError::EmptyIndex(ItemKind::Classes));
        }
        if !g.edges().is_empty() && self.links.is_empty() {
            return Err(SemanticError::EmptyIndex(ItemKind::Links));
        }

        let mut node_queries = Vec::new();
        let mut classes: BTreeMap<String, ScoredItem> = BTreeMap::new();
        for node in g.nodes() {
            let q = self.embed_query(&node.class)?;
            for item in self.top_k_vector(&q, ItemKind::Classes, k) {
                keep_max(&mut classes, item);
            }
            node_queries.push(q);
        }

        let class_of = g.class_of();
        let mut links: BTreeMap<String, ScoredItem> = BTreeMap::new();
        for edge in g.edges() {
            let text =
                format!("{} — from {} to {}", edge.link, class_of[edge.tail.as_str()], class_of[edge.head.as_str()]);
            // the bare label too: endpoint words can crowd the link itself out
            for q in [self.embed_query(&text)?, self.embed_query(&edge.link)?] {
                for item in self.top_k_vector(&q, ItemKind::Links, k) {
                    keep_max(&mut links, item);
                }
            }
        }

        for link in links.values() {
            let Some(def) = index.link(&link.iri) else { continue };
            for end in [&def.from_type, &def.to_type] {
                if classes.contains_key(end) {
                    continue;
                }
                let Some(label) = index.class(end).map(|c| c.label.clone()) else { continue };
                let score = self
                    .vector_of(ItemKind::Classes, end)
                    .map(|v| node_queries.iter().map(|q| cosine(q, v)).fold(-1.0f32, f32::max))
                    .unwrap_or(-1.0);
                classes.insert(end.clone(), ScoredItem { iri: end.clone(), label, score });
            }
        }

        let mut classes: Vec<ScoredItem> = classes.into_values().collect();
        let mut links: Vec<ScoredItem> = links.into_values().collect();
        classes.sort_by(rank_order);
        links.sort_by(rank_order);
        Ok(CandidateSet { classes, links })
    }
}

fn rank_order(a: &ScoredItem, b: &ScoredItem) -> Ordering {
    b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal).then_with(|| a.iri.cmp(&b.iri))
}

fn keep_max(map: &mut BTreeMap<String, ScoredItem>, item: ScoredItem) {
    match map.get_mut(&item.iri) {
        Some(existing) if existing.score >= item.score => {}
        Some(existing) => *existing = item,
        None => {
            map.insert(item.iri.clone(), item);
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;
    use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

    use super::*;
    use crate::fixtures::{self, dbo};
    use crate::graph::{GraphEdge, GraphNode};

    struct Counting {
        inner: HashEmbedder,
        calls: AtomicUsize,
    }

    impl Embedder for Counting {
        fn model_id(&self) -> &str {
            self.inner.model_id()
        }
        fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, SemanticError> {
            self.calls.fetch_add(1, AtomicOrdering::SeqCst);
            self.inner.embed(texts)
        }
    }

    /// Maps known texts to fixed vectors; anything else gets `fallback`.
    struct TableEmbedder {
        table: HashMap<String, Vec<f32>>,
        fallback: Vec<f32>,
    }

    impl Embedder for TableEmbedder {
        fn model_id(&self) -> &str {
            "table"
        }
        fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, SemanticError> {
            Ok(texts.iter().map(|t| self.table.get(t).cloned().unwrap_or(self.fallback.clone())).collect())
        }
    }

    /// Alternates vector lengths between calls.
    struct Ragged(AtomicUsize);

    impl Embedder for Ragged {
        fn model_id(&self) -> &str {
            "ragged"
        }
        fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, SemanticError> {
            let n = self.0.fetch_add(1, AtomicOrdering::SeqCst);
            Ok(texts.iter().map(|_| vec![1.0; 4 + n]).collect())
        }
    }

    fn hash_index() -> SemanticIndex {
        SemanticIndex::build(fixtures::dbpedia_excerpt(), Arc::new(HashEmbedder::default()), None).unwrap()
    }

    #[test]
    fn builds_one_vector_per_item() {
        let sidx = hash_index();
        let idx = fixtures::dbpedia_excerpt();
        assert_eq!(sidx.len(ItemKind::Classes), idx.class_count());
        assert_eq!(sidx.len(ItemKind::Links), idx.link_count());
    }

    #[test]
    fn warm_cache_skips_embedding() {
        let dir = tempfile::tempdir().unwrap();
        let idx = fixtures::dbpedia_excerpt();
        let counting = Arc::new(Counting { inner: HashEmbedder::default(), calls: AtomicUsize::new(0) });
        let cold = SemanticIndex::build(idx, counting.clone(), Some(dir.path())).unwrap();
        assert!(counting.calls.load(AtomicOrdering::SeqCst) > 0);
        counting.calls.store(0, AtomicOrdering::SeqCst);
        let warm = SemanticIndex::build(idx, counting.clone(), Some(dir.path())).unwrap();
        assert_eq!(counting.calls.load(AtomicOrdering::SeqCst), 0);
        let a = cold.top_k("alma mater", ItemKind::Links, 3).unwrap();
        let b = warm.top_k("alma mater", ItemKind::Links, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mixed_dimensions_fail() {
        let err =
            SemanticIndex::build(fixtures::dbpedia_excerpt(), Arc::new(Ragged(AtomicUsize::new(0))), None).unwrap_err();
        assert!(matches!(err, SemanticError::DimensionMismatch { .. }));
    }

    #[test]
    fn zero_vector_is_rejected() {
        let table = TableEmbedder { table: HashMap::new(), fallback: vec![0.0; 3] };
        let err = SemanticIndex::build(fixtures::toy(), Arc::new(table), None).unwrap_err();
        assert!(matches!(err, SemanticError::DegenerateVector(_)));
    }

    #[test]
    fn identical_description_ranks_first() {
        let sidx = hash_index();
        let idx = fixtures::dbpedia_excerpt();
        let text = idx.describe(&dbo("almaMater")).unwrap();
        let top = sidx.top_k(&text, ItemKind::Links, 1).unwrap();
        assert_eq!(top[0].iri, dbo("almaMater"));
        assert!((top[0].score - 1.0).abs() < 1e-6);
    }

    #[test]
    fn oversized_k_returns_everything_sorted() {
        let sidx = hash_index();
        let all = sidx.top_k("person", ItemKind::Classes, 500).unwrap();
        assert_eq!(all.len(), 35);
        assert!(all.windows(2).all(|w| w[0].score > w[1].score || (w[0].score == w[1].score && w[0].iri < w[1].iri)));
        assert!(matches!(sidx.top_k("x", ItemKind::Classes, 0), Err(SemanticError::InvalidK)));
    }

    #[test]
    fn aligned_vector_wins_over_orthogonal_ones() {
        // Three orthogonal unit vectors plus one at 45° between e0 and e1.
        // Query e0: cosines are 1/sqrt(2) for "d", 1 for "a", 0 for "b" and "c".
        let rows = vec![
            ("a".to_string(), "a".to_string(), vec![1.0, 0.0, 0.0]),
            ("b".to_string(), "b".to_string(), vec![0.0, 1.0, 0.0]),
            ("c".to_string(), "c".to_string(), vec![0.0, 0.0, 1.0]),
            ("d".to_string(), "d".to_string(), vec![1.0, 1.0, 0.0]),
        ];
        let table = TableEmbedder {
            table: HashMap::from([("query".to_string(), vec![1.0, 0.0, 0.0])]),
            fallback: vec![0.0, 0.0, 1.0],
        };
        let sidx = SemanticIndex::from_vectors(Arc::new(table), rows, vec![]).unwrap();
        let top = sidx.top_k("query", ItemKind::Classes, 4).unwrap();
        let order: Vec<_> = top.iter().map(|s| s.iri.as_str()).collect();
        assert_eq!(order, ["a", "d", "b", "c"]);
        assert!((top[1].score - std::f32::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert!(matches!(sidx.top_k("query", ItemKind::Links, 1), Err(SemanticError::EmptyIndex(ItemKind::Links))));
    }

    #[test]
    fn insertion_order_does_not_change_ranking() {
        let rows: Vec<_> = (0..6).map(|i| (format!("i{i}"), format!("i{i}"), vec![1.0, (i % 3) as f32, 0.5])).collect();
        let mut reversed = rows.clone();
        reversed.reverse();
        let emb = || Arc::new(HashEmbedder::new(3)) as Arc<dyn Embedder>;
        let a = SemanticIndex::from_vectors(emb(), rows, vec![]).unwrap();
        let b = SemanticIndex::from_vectors(emb(), reversed, vec![]).unwrap();
        let q = [1.0, 1.0, 0.0];
        assert_eq!(a.top_k_vector(&q, ItemKind::Classes, 6), b.top_k_vector(&q, ItemKind::Classes, 6));
    }

    fn raw(nodes: &[(&str, &str)], edges: &[(&str, &str, &str)]) -> PrototypeGraph {
        PrototypeGraph::new(
            nodes.iter().map(|(i, c)| GraphNode::new(*i, *c)).collect(),
            edges.iter().map(|(t, l, h)| GraphEdge::new(*t, *l, *h)).collect(),
            Stage::Raw,
        )
        .unwrap()
    }

    #[test]
    fn candidates_cover_person_and_university() {
        let sidx = hash_index();
        let idx = fixtures::dbpedia_excerpt();
        let g = raw(&[("a", "person"), ("b", "university")], &[]);
        let c = sidx.candidates_for_graph(&g, 3, idx).unwrap();
        let iris: Vec<_> = c.class_iris().collect();
        assert!(iris.contains(&dbo("Person").as_str()));
        assert!(iris.contains(&dbo("University").as_str()));
        assert!(c.links.is_empty());
    }

    #[test]
    fn duplicate_nodes_do_not_duplicate_candidates() {
        let sidx = hash_index();
        let idx = fixtures::dbpedia_excerpt();
        let g = raw(&[("a", "person"), ("b", "person")], &[("a", "child", "b")]);
        let c = sidx.candidates_for_graph(&g, 4, idx).unwrap();
        let mut iris: Vec<_> = c.class_iris().collect();
        let n = iris.len();
        iris.sort();
        iris.dedup();
        assert_eq!(iris.len(), n);
        assert!(c.classes.len() <= 4 * 2 + 2 * c.links.len());
        assert!(c.links.len() <= 2 * 4);
        // closure: every link's endpoints are candidate classes
        for l in &c.links {
            let def = idx.link(&l.iri).unwrap();
            assert!(c.class_iris().any(|i| i == def.from_type));
            assert!(c.class_iris().any(|i| i == def.to_type));
        }
    }

    #[test]
    fn candidate_retrieval_requires_raw_stage() {
        let sidx = hash_index();
        let g = fixtures::alumni_graph();
        assert!(matches!(
            sidx.candidates_for_graph(&g, 3, fixtures::dbpedia_excerpt()),
            Err(SemanticError::WrongStage(Stage::Corrected))
        ));
    }

    #[test]
    fn every_label_retrieves_itself_with_default_k() {
        let sidx = hash_index();
        let idx = fixtures::dbpedia_excerpt();
        for c in idx.classes() {
            let top = sidx.top_k(&c.label, ItemKind::Classes, DEFAULT_K).unwrap();
            assert!(top.iter().any(|s| s.iri == c.iri), "class {}", c.label);
        }
    }
}
