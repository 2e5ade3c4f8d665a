//! Random prototype graphs drawn from the ontology, weighted by instance
//! counts.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::graph::{GraphEdge, GraphNode, PrototypeGraph, Stage};
use crate::ontology::{LinkDef, OntologyIndex, SamplingMode, Side};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// How many of the most frequent links each draw chooses from.
    pub top_k_links: usize,
    /// Subclass depth considered when downgrading a node's class.
    pub depth: usize,
    pub max_nodes: usize,
    pub mode: SamplingMode,
    pub rng_seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { top_k_links: 10, depth: 2, max_nodes: 3, mode: SamplingMode::Probabilistic, rng_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledGraph {
    pub graph: PrototypeGraph,
    /// True when no link could be attached before reaching `max_nodes`.
    pub early_stop: bool,
}

/// Index of a weighted draw; falls back to uniform when every weight is 0
/// or the mode is uniform.
fn draw<R: Rng + ?Sized>(weights: &[u64], mode: SamplingMode, rng: &mut R) -> usize {
    if mode == SamplingMode::Probabilistic {
        if let Ok(dist) = WeightedIndex::new(weights.iter().map(|w| *w as f64)) {
            return dist.sample(rng);
        }
    }
    rng.random_range(0..weights.len())
}

/// Replaces a class by itself or one of its subclasses within `cfg.depth`
/// levels, weighted by instance count.
pub fn downgrade_node<R: Rng + ?Sized>(
    class: &str,
    index: &OntologyIndex,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<String, EvalError> {
    let pool = index.subtypes_within(class, cfg.depth).map_err(|_| EvalError::UnknownClass(class.to_string()))?;
    let weights: Vec<u64> = pool.iter().map(|c| index.class(c).map_or(0, |d| d.instance_count)).collect();
    Ok(pool[draw(&weights, cfg.mode, rng)].clone())
}

fn draw_link<'a, R: Rng + ?Sized>(links: &[&'a LinkDef], cfg: &SamplerConfig, rng: &mut R) -> &'a LinkDef {
    let top = &links[..links.len().min(cfg.top_k_links.max(1))];
    let weights: Vec<u64> = top.iter().map(|l| l.instance_count).collect();
    top[draw(&weights, cfg.mode, rng)]
}

fn class_label(index: &OntologyIndex, iri: &str) -> String {
    index.class(iri).map(|c| c.label.clone()).unwrap_or_default()
}

/// Draws a seed edge among the top links, downgrades both endpoints, then
/// grows the graph one edge and one new node at a time from a uniformly
/// chosen existing node and side (left = incoming, right = outgoing) until
/// `max_nodes` is reached or no node has an attachable link.
pub fn sample_graph<R: Rng + ?Sized>(
    index: &OntologyIndex,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<SampledGraph, EvalError> {
    let by_count = index.links_by_count();
    if by_count.is_empty() {
        return Err(EvalError::NoLinks);
    }
    let seed = draw_link(&by_count, cfg, rng);
    let tail = downgrade_node(&seed.from_type, index, cfg, rng)?;
    let head = downgrade_node(&seed.to_type, index, cfg, rng)?;
    let mut nodes = vec![GraphNode::new("n0", tail), GraphNode::new("n1", head)];
    let mut edges = vec![GraphEdge::new("n0", &seed.iri, "n1")];
    let mut early_stop = false;

    while nodes.len() < cfg.max_nodes {
        let mut viable = Vec::new();
        for (i, n) in nodes.iter().enumerate() {
            for side in [Side::Incoming, Side::Outgoing] {
                let links = index.links_for(&n.class, side).map_err(|_| EvalError::UnknownClass(n.class.clone()))?;
                if !links.is_empty() {
                    viable.push((i, side, links));
                }
            }
        }
        let Some((i, side, links)) = viable.choose(rng) else {
            early_stop = true;
            break;
        };
        let link = draw_link(links, cfg, rng);
        let new_id = format!("n{}", nodes.len());
        let anchor = nodes[*i].id.clone();
        let (class, edge) = match side {
            Side::Outgoing => (&link.to_type, GraphEdge::new(&anchor, &link.iri, &new_id)),
            Side::Incoming => (&link.from_type, GraphEdge::new(&new_id, &link.iri, &anchor)),
        };
        let class = downgrade_node(class, index, cfg, rng)?;
        nodes.push(GraphNode::new(new_id, class));
        edges.push(edge);
    }

    let graph = PrototypeGraph::new(nodes, edges, Stage::Sampled)
        .expect("sampler builds well-formed graphs")
        .with_canonical_ids(|c| class_label(index, c));
    Ok(SampledGraph { graph, early_stop })
}

/// Independent generator for work item `stream` of a run, so results do
/// not depend on evaluation order.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, dbo};
    use crate::graph::validate_graph;
    use crate::ontology::{load_ontology, OntologySource};

    fn one_link() -> OntologyIndex {
        let ttl = r#"
@prefix ex: <http://e/> . @prefix owl: <http://www.w3.org/2002/07/owl#> .
@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .
ex:A a owl:Class . ex:B a owl:Class .
ex:r a owl:ObjectProperty ; rdfs:domain ex:A ; rdfs:range ex:B .
"#;
        load_ontology(&[OntologySource::turtle(ttl)], None).unwrap().0
    }

    #[test]
    fn leaf_class_downgrades_to_itself() {
        let idx = fixtures::dbpedia_excerpt();
        let mut rng = stream_rng(1, 0);
        for _ in 0..20 {
            let c = downgrade_node(&dbo("SoccerPlayer"), idx, &SamplerConfig::default(), &mut rng).unwrap();
            assert_eq!(c, dbo("SoccerPlayer"));
        }
        assert!(downgrade_node("http://nope", idx, &SamplerConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn single_link_ontology_gives_that_edge() {
        let idx = one_link();
        let cfg = SamplerConfig { max_nodes: 2, ..Default::default() };
        let s = sample_graph(&idx, &cfg, &mut stream_rng(0, 0)).unwrap();
        assert_eq!(s.graph.edges().len(), 1);
        assert_eq!(s.graph.typed_edges()[0], ("http://e/A".into(), "http://e/r".into(), "http://e/B".into()));
    }

    #[test]
    fn grows_to_max_nodes() {
        // every node keeps at least the link it was created with
        let idx = one_link();
        let cfg = SamplerConfig { max_nodes: 4, ..Default::default() };
        let s = sample_graph(&idx, &cfg, &mut stream_rng(0, 1)).unwrap();
        assert_eq!(s.graph.nodes().len(), 4);
        assert!(!s.early_stop);
    }

    #[test]
    fn samples_validate_and_are_deterministic() {
        let idx = fixtures::dbpedia_excerpt();
        let cfg = SamplerConfig { max_nodes: 5, ..Default::default() };
        for i in 0..200 {
            let s = sample_graph(idx, &cfg, &mut stream_rng(9, i)).unwrap();
            assert!(validate_graph(&s.graph, idx).is_valid());
            assert!(s.graph.nodes().len() <= 5);
            assert_eq!(sample_graph(idx, &cfg, &mut stream_rng(9, i)).unwrap(), s);
        }
    }
}
