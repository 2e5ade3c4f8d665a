//! Multiset F1 over node classes and typed edges.

use std::collections::HashMap;
use std::hash::Hash;

use crate::graph::PrototypeGraph;

fn counts<T: Hash + Eq>(items: &[T]) -> HashMap<&T, usize> {
    let mut m = HashMap::new();
    for it in items {
        *m.entry(it).or_insert(0) += 1;
    }
    m
}

/// Size of the multiset intersection.
pub fn multiset_overlap<T: Hash + Eq>(a: &[T], b: &[T]) -> usize {
    let cb = counts(b);
    counts(a).iter().map(|(k, n)| (*n).min(cb.get(k).copied().unwrap_or(0))).sum()
}

/// `2TP / (2TP + FP + FN)` with multiset semantics. Two empty inputs score
/// 1, exactly one empty input scores 0.
pub fn f1_sets<T: Hash + Eq>(predicted: &[T], truth: &[T]) -> f64 {
    if predicted.is_empty() && truth.is_empty() {
        return 1.0;
    }
    let tp = multiset_overlap(predicted, truth);
    let fp = predicted.len() - tp;
    let fn_ = truth.len() - tp;
    (2 * tp) as f64 / (2 * tp + fp + fn_) as f64
}

pub fn f1_node(predicted: &PrototypeGraph, truth: &PrototypeGraph) -> f64 {
    let classes = |g: &PrototypeGraph| g.nodes().iter().map(|n| n.class.clone()).collect::<Vec<_>>();
    f1_sets(&classes(predicted), &classes(truth))
}

/// F1 over `(tail class, link, head class)` triples.
pub fn f1_rel(predicted: &PrototypeGraph, truth: &PrototypeGraph) -> f64 {
    f1_sets(&predicted.typed_edges(), &truth.typed_edges())
}
