//! Immutable ontology snapshot: classes with their hierarchy, links with
//! domain/range, labels, descriptions and instance counts.

mod load;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use load::{load_ontology, local_name, parse_count_table, DroppedLink, LoadReport, OntologySource, RdfFormat};

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("failed to parse ontology document: {0}")]
    Parse(String),
    #[error("ontology declares no classes")]
    Empty,
    #[error("class hierarchy contains a cycle through {0}")]
    Cycle(String),
    #[error("malformed count table at line {line}: {reason}")]
    CountTable { line: usize, reason: String },
    #[error("unknown iri: {0}")]
    UnknownIri(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    #[default]
    Probabilistic,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Outgoing,
    Incoming,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDef {
    pub iri: String,
    pub label: String,
    pub description: String,
    pub parents: BTreeSet<String>,
    pub instance_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkDef {
    pub iri: String,
    pub label: String,
    pub description: String,
    pub from_type: String,
    pub to_type: String,
    pub instance_count: u64,
}

/// Read-only view over an ontology. Construct with [`load_ontology`] or
/// [`OntologyIndex::new`]; nothing mutates it afterwards, so it can be shared
/// behind an `Arc` between any number of readers.
#[derive(Debug, Clone)]
pub struct OntologyIndex {
    classes: BTreeMap<String, ClassDef>,
    links: BTreeMap<String, LinkDef>,
    sampling_mode: SamplingMode,
    children: BTreeMap<String, Vec<String>>,
    ancestors: HashMap<String, BTreeSet<String>>,
    class_labels: HashMap<String, Vec<String>>,
    link_labels: HashMap<String, Vec<String>>,
}

impl OntologyIndex {
    /// Builds an index from already-resolved definitions, checking referential
    /// closure and acyclicity.
    pub fn new(
        classes: impl IntoIterator<Item = ClassDef>,
        links: impl IntoIterator<Item = LinkDef>,
        sampling_mode: SamplingMode,
    ) -> Result<Self, OntologyError> {
        let classes: BTreeMap<String, ClassDef> = classes.into_iter().map(|c| (c.iri.clone(), c)).collect();
        if classes.is_empty() {
            return Err(OntologyError::Empty);
        }
        let links: BTreeMap<String, LinkDef> = links.into_iter().map(|l| (l.iri.clone(), l)).collect();

        for class in classes.values() {
            for parent in &class.parents {
                if !classes.contains_key(parent) {
                    return Err(OntologyError::UnknownIri(parent.clone()));
                }
            }
        }
        for link in links.values() {
            for end in [&link.from_type, &link.to_type] {
                if !classes.contains_key(end) {
                    return Err(OntologyError::UnknownIri(end.clone()));
                }
            }
        }

        let mut children: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for class in classes.values() {
            for parent in &class.parents {
                children.entry(parent.clone()).or_default().push(class.iri.clone());
            }
        }
        check_acyclic(&classes)?;

        let ancestors = classes.keys().map(|iri| (iri.clone(), ancestor_closure(iri, &classes))).collect();

        let mut class_labels: HashMap<String, Vec<String>> = HashMap::new();
        for class in classes.values() {
            class_labels.entry(class.label.to_lowercase()).or_default().push(class.iri.clone());
        }
        let mut link_labels: HashMap<String, Vec<String>> = HashMap::new();
        for link in links.values() {
            link_labels.entry(link.label.to_lowercase()).or_default().push(link.iri.clone());
        }

        Ok(Self { classes, links, sampling_mode, children, ancestors, class_labels, link_labels })
    }

    pub fn with_sampling_mode(mut self, mode: SamplingMode) -> Self {
        self.sampling_mode = mode;
        self
    }

    pub fn sampling_mode(&self) -> SamplingMode {
        self.sampling_mode
    }

    /// Classes in iri order.
    pub fn classes(&self) -> impl Iterator<Item = &ClassDef> {
        self.classes.values()
    }

    /// Links in iri order.
    pub fn links(&self) -> impl Iterator<Item = &LinkDef> {
        self.links.values()
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn class(&self, iri: &str) -> Option<&ClassDef> {
        self.classes.get(iri)
    }

    pub fn link(&self, iri: &str) -> Option<&LinkDef> {
        self.links.get(iri)
    }

    fn require_class(&self, iri: &str) -> Result<&ClassDef, OntologyError> {
        self.class(iri).ok_or_else(|| OntologyError::UnknownIri(iri.to_string()))
    }

    /// Reflexive-transitive subclass test over the full parent DAG.
    pub fn subtypeof(&self, candidate: &str, ancestor: &str) -> Result<bool, OntologyError> {
        self.require_class(candidate)?;
        self.require_class(ancestor)?;
        Ok(self.ancestors[candidate].contains(ancestor))
    }

    /// Infallible variant for callers that already resolved both iris.
    pub(crate) fn is_subtype(&self, candidate: &str, ancestor: &str) -> bool {
        self.ancestors.get(candidate).is_some_and(|set| set.contains(ancestor))
    }

    /// The class and all its superclasses.
    pub fn ancestors(&self, iri: &str) -> Option<&BTreeSet<String>> {
        self.ancestors.get(iri)
    }

    /// Direct subclasses, in iri order.
    pub fn children(&self, iri: &str) -> &[String] {
        self.children.get(iri).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The class itself plus all subclasses reachable within `depth` steps,
    /// breadth first, without duplicates.
    pub fn subtypes_within(&self, iri: &str, depth: usize) -> Result<Vec<String>, OntologyError> {
        self.require_class(iri)?;
        let mut seen = BTreeSet::from([iri.to_string()]);
        let mut out = vec![iri.to_string()];
        let mut frontier = vec![iri.to_string()];
        for _ in 0..depth {
            let mut next = Vec::new();
            for class in &frontier {
                for child in self.children(class) {
                    if seen.insert(child.clone()) {
                        out.push(child.clone());
                        next.push(child.clone());
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok(out)
    }

    /// Links attachable to `node_class` on the given side, ordered by
    /// descending instance count and then iri.
    pub fn links_for(&self, node_class: &str, side: Side) -> Result<Vec<&LinkDef>, OntologyError> {
        self.require_class(node_class)?;
        let mut out: Vec<&LinkDef> = self
            .links
            .values()
            .filter(|l| match side {
                Side::Outgoing => self.is_subtype(node_class, &l.from_type),
                Side::Incoming => self.is_subtype(node_class, &l.to_type),
            })
            .collect();
        sort_links_by_count(&mut out);
        Ok(out)
    }

    /// All links ordered by descending instance count, ties by iri.
    pub fn links_by_count(&self) -> Vec<&LinkDef> {
        let mut out: Vec<&LinkDef> = self.links.values().collect();
        sort_links_by_count(&mut out);
        out
    }

    /// Embedding input text for a class or link.
    pub fn describe(&self, iri: &str) -> Result<String, OntologyError> {
        if let Some(class) = self.class(iri) {
            return Ok(join_segments(&[&class.label, &class.description]));
        }
        if let Some(link) = self.link(iri) {
            let from = &self.classes[&link.from_type].label;
            let to = &self.classes[&link.to_type].label;
            let endpoints = format!("from {from} to {to}");
            return Ok(join_segments(&[&link.label, &link.description, &endpoints]));
        }
        Err(OntologyError::UnknownIri(iri.to_string()))
    }

    /// Classes whose label equals `label` ignoring case, in iri order.
    pub fn classes_with_label(&self, label: &str) -> &[String] {
        self.class_labels.get(&label.to_lowercase()).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn links_with_label(&self, label: &str) -> &[String] {
        self.link_labels.get(&label.to_lowercase()).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Hex SHA-256 over a canonical rendering of every class and link,
    /// including counts. Used to key the embedding cache.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for c in self.classes.values() {
            hasher.update(b"C\0");
            for field in [&c.iri, &c.label, &c.description] {
                hasher.update(field.as_bytes());
                hasher.update(b"\0");
            }
            for p in &c.parents {
                hasher.update(p.as_bytes());
                hasher.update(b"\0");
            }
            hasher.update(c.instance_count.to_le_bytes());
        }
        for l in self.links.values() {
            hasher.update(b"L\0");
            for field in [&l.iri, &l.label, &l.description, &l.from_type, &l.to_type] {
                hasher.update(field.as_bytes());
                hasher.update(b"\0");
            }
            hasher.update(l.instance_count.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

fn sort_links_by_count(links: &mut [&LinkDef]) {
    links.sort_by(|a, b| b.instance_count.cmp(&a.instance_count).then_with(|| a.iri.cmp(&b.iri)));
}

fn join_segments(segments: &[&str]) -> String {
    segments.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect::<Vec<_>>().join(" — ")
}

fn ancestor_closure(iri: &str, classes: &BTreeMap<String, ClassDef>) -> BTreeSet<String> {
    let mut seen = BTreeSet::from([iri.to_string()]);
    let mut queue = VecDeque::from([iri.to_string()]);
    while let Some(current) = queue.pop_front() {
        for parent in &classes[&current].parents {
            if seen.insert(parent.clone()) {
                queue.push_back(parent.clone());
            }
        }
    }
    seen
}

fn check_acyclic(classes: &BTreeMap<String, ClassDef>) -> Result<(), OntologyError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut marks: HashMap<&str, Mark> = HashMap::new();
    for start in classes.keys() {
        if marks.contains_key(start.as_str()) {
            continue;
        }
        // iterative DFS over parent edges
        let mut stack: Vec<(&str, Vec<&str>)> =
            vec![(start.as_str(), classes[start].parents.iter().map(String::as_str).collect())];
        marks.insert(start, Mark::Open);
        while let Some((node, pending)) = stack.last_mut() {
            if let Some(next) = pending.pop() {
                match marks.get(next) {
                    Some(Mark::Open) => return Err(OntologyError::Cycle(next.to_string())),
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(next, Mark::Open);
                        let parents = classes[next].parents.iter().map(String::as_str).collect();
                        stack.push((next, parents));
                    }
                }
            } else {
                marks.insert(node, Mark::Done);
                stack.pop();
            }
        }
    }
    Ok(())
}
