//! Exact graph edit distance with unit costs, by branch and bound over node
//! maps.
//!
//! Every node of the first graph is mapped to a distinct node of the second
//! or deleted; unmatched nodes of the second graph are inserted. For a pair
//! of mapped nodes the parallel edges between them are matched optimally,
//! which for unit costs is `max(|A|, |B|) - |A ∩ B|` on the two label
//! multisets. Edges at deleted or inserted nodes cost one each.

use std::collections::HashMap;

use super::metrics::multiset_overlap;
use super::EvalError;
use crate::graph::PrototypeGraph;

/// Largest graph (in nodes) the exact solver accepts.
pub const GED_MAX_NODES: usize = 10;

struct Side<'a> {
    labels: Vec<&'a str>,
    /// Edge labels keyed by ordered node pair.
    pairs: HashMap<(usize, usize), Vec<&'a str>>,
    /// Edge labels incident to each node (self loops once).
    incident: Vec<Vec<(usize, usize, &'a str)>>,
    edge_count: usize,
}

impl<'a> Side<'a> {
    fn new(g: &'a PrototypeGraph) -> Self {
        let pos: HashMap<&str, usize> = g.nodes().iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
        let mut pairs: HashMap<(usize, usize), Vec<&str>> = HashMap::new();
        let mut incident = vec![Vec::new(); g.nodes().len()];
        for e in g.edges() {
            let (t, h) = (pos[e.tail.as_str()], pos[e.head.as_str()]);
            pairs.entry((t, h)).or_default().push(e.link.as_str());
            incident[t].push((t, h, e.link.as_str()));
            if h != t {
                incident[h].push((t, h, e.link.as_str()));
            }
        }
        Self {
            labels: g.nodes().iter().map(|n| n.class.as_str()).collect(),
            pairs,
            incident,
            edge_count: g.edges().len(),
        }
    }

    fn pair(&self, a: usize, b: usize) -> &[&'a str] {
        self.pairs.get(&(a, b)).map(Vec::as_slice).unwrap_or(&[])
    }
}

fn pair_cost(a: &[&str], b: &[&str]) -> usize {
    a.len().max(b.len()) - multiset_overlap(a, b)
}

struct Search<'a> {
    g1: Side<'a>,
    g2: Side<'a>,
    /// Image of each g1 node in visiting order; `None` is deletion.
    map: Vec<Option<usize>>,
    used: Vec<bool>,
    best: usize,
}

impl Search<'_> {
    /// Cost added by deciding node `i` given the decisions for `0..i`:
    /// the node operation plus all g1 edges between `i` and decided nodes,
    /// and the g2 edges those decisions cover.
    fn step_cost(&self, i: usize, target: Option<usize>) -> (usize, usize) {
        let mut cost = 0;
        let mut covered = 0;
        match target {
            None => {
                cost += 1;
                // every edge between i and an already decided node (or itself)
                cost += self.g1.incident[i].iter().filter(|(t, h, _)| *t <= i && *h <= i).count();
            }
            Some(x) => {
                if self.g1.labels[i] != self.g2.labels[x] {
                    cost += 1;
                }
                for j in 0..=i {
                    let y = if j == i { Some(x) } else { self.map[j] };
                    match y {
                        Some(y) => {
                            let a = self.g1.pair(i, j);
                            let b = self.g2.pair(x, y);
                            cost += pair_cost(a, b);
                            covered += b.len();
                            if j != i {
                                let a = self.g1.pair(j, i);
                                let b = self.g2.pair(y, x);
                                cost += pair_cost(a, b);
                                covered += b.len();
                            }
                        }
                        None => {
                            cost += self.g1.pair(i, j).len() + self.g1.pair(j, i).len();
                        }
                    }
                }
            }
        }
        (cost, covered)
    }

    /// Admissible bound on the cost of deciding nodes `i..`.
    fn lower_bound(&self, i: usize) -> usize {
        let rest1: Vec<&str> = self.g1.labels[i..].to_vec();
        let rest2: Vec<&str> =
            (0..self.g2.labels.len()).filter(|x| !self.used[*x]).map(|x| self.g2.labels[x]).collect();
        let nodes = rest1.len().max(rest2.len()) - multiset_overlap(&rest1, &rest2);

        let mut e1 = Vec::new();
        for k in i..self.g1.labels.len() {
            for (t, h, l) in &self.g1.incident[k] {
                // count each edge once, at its smallest undecided endpoint
                let first = if *t >= i && *h >= i { (*t).min(*h) } else { k };
                if first == k {
                    e1.push(*l);
                }
            }
        }
        let mut e2 = Vec::new();
        for x in 0..self.g2.labels.len() {
            if self.used[x] {
                continue;
            }
            for (t, h, l) in &self.g2.incident[x] {
                let first = if !self.used[*t] && !self.used[*h] { (*t).min(*h) } else { x };
                if first == x {
                    e2.push(*l);
                }
            }
        }
        let edges = e1.len().max(e2.len()) - multiset_overlap(&e1, &e2);
        nodes + edges
    }

    fn run(&mut self, i: usize, cost: usize, covered: usize) {
        if cost + self.lower_bound(i) >= self.best {
            return;
        }
        let n1 = self.g1.labels.len();
        if i == n1 {
            let inserted_nodes = self.used.iter().filter(|u| !**u).count();
            let total = cost + inserted_nodes + (self.g2.edge_count - covered);
            self.best = self.best.min(total);
            return;
        }
        // same-label targets first so good solutions are found early
        let mut targets: Vec<usize> = (0..self.g2.labels.len()).filter(|x| !self.used[*x]).collect();
        targets.sort_by_key(|x| self.g2.labels[*x] != self.g1.labels[i]);
        for x in targets {
            let (c, cov) = self.step_cost(i, Some(x));
            self.map.push(Some(x));
            self.used[x] = true;
            self.run(i + 1, cost + c, covered + cov);
            self.used[x] = false;
            self.map.pop();
        }
        let (c, cov) = self.step_cost(i, None);
        self.map.push(None);
        self.run(i + 1, cost + c, covered + cov);
        self.map.pop();
    }
}

/// Minimum number of unit edit operations turning `g1` into `g2`.
pub fn ged(g1: &PrototypeGraph, g2: &PrototypeGraph) -> Result<usize, EvalError> {
    let nodes = g1.nodes().len().max(g2.nodes().len());
    if nodes > GED_MAX_NODES {
        return Err(EvalError::GraphTooLarge { nodes, max: GED_MAX_NODES });
    }
    let (s1, s2) = (Side::new(g1), Side::new(g2));
    let trivial = s1.labels.len() + s1.edge_count + s2.labels.len() + s2.edge_count;
    let used = vec![false; s2.labels.len()];
    let mut search = Search { g1: s1, g2: s2, map: Vec::new(), used, best: trivial + 1 };
    search.run(0, 0, 0);
    Ok(search.best)
}

/// `1 - GED / (max node count + max edge count)`, clamped to [0, 1]; two
/// empty graphs score 1.
pub fn ged_score(g1: &PrototypeGraph, g2: &PrototypeGraph) -> Result<f64, EvalError> {
    let denom = g1.nodes().len().max(g2.nodes().len()) + g1.edges().len().max(g2.edges().len());
    let d = ged(g1, g2)?;
    if denom == 0 {
        return Ok(1.0);
    }
    Ok((1.0 - d as f64 / denom as f64).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, dbo};
    use crate::graph::{GraphEdge, GraphNode, Stage};

    fn g(nodes: &[(&str, &str)], edges: &[(&str, &str, &str)]) -> PrototypeGraph {
        PrototypeGraph::new(
            nodes.iter().map(|(id, c)| GraphNode::new(*id, *c)).collect(),
            edges.iter().map(|(t, l, h)| GraphEdge::new(*t, *l, *h)).collect(),
            Stage::Sampled,
        )
        .unwrap()
    }

    #[test]
    fn identical_and_empty() {
        let f = fixtures::alumni_graph();
        assert_eq!(ged(&f, &f).unwrap(), 0);
        assert_eq!(ged_score(&f, &f).unwrap(), 1.0);
        let e = PrototypeGraph::empty(Stage::Sampled);
        assert_eq!(ged_score(&e, &e).unwrap(), 1.0);
        assert_eq!(ged(&e, &f).unwrap(), 6);
        assert_eq!(ged_score(&e, &f).unwrap(), 0.0);
    }

    #[test]
    fn one_extra_edge_and_node() {
        let (p, u) = (dbo("Person"), dbo("University"));
        let g1 = g(&[("a", &p), ("b", &u)], &[("a", &dbo("almaMater"), "b")]);
        let g2 = g(&[("a", &p), ("b", &u), ("c", &p)], &[("a", &dbo("almaMater"), "b"), ("a", &dbo("child"), "c")]);
        assert_eq!(ged(&g1, &g2).unwrap(), 2);
        assert!((ged_score(&g1, &g2).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn ids_do_not_matter() {
        let a = g(&[("x", "A"), ("y", "B")], &[("x", "r", "y")]);
        let b = g(&[("q", "B"), ("p", "A")], &[("p", "r", "q")]);
        assert_eq!(ged(&a, &b).unwrap(), 0);
    }

    #[test]
    fn direction_matters() {
        let a = g(&[("x", "A"), ("y", "A")], &[("x", "r", "y")]);
        let b = g(&[("x", "A"), ("y", "B")], &[("y", "r", "x")]);
        // relabel y, edge direction is then fixed by mapping x->y', y->x'
        assert_eq!(ged(&a, &b).unwrap(), 1);
    }

    #[test]
    fn budget() {
        let nodes: Vec<(String, String)> = (0..11).map(|i| (format!("n{i}"), "A".to_string())).collect();
        let refs: Vec<(&str, &str)> = nodes.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let big = g(&refs, &[]);
        assert!(matches!(ged(&big, &big), Err(EvalError::GraphTooLarge { .. })));
    }
}
