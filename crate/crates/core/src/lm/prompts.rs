//! Prompt templates shipped with the crate. Their hash goes into every
//! pipeline trace and benchmark report.

use std::collections::HashSet;

use sha2::{Digest, Sha256};

use crate::graph::PrototypeGraph;

pub const EXTRACTION_TEMPLATE: &str = include_str!("../../assets/prompts/extract.txt");
pub const QUERY_GENERATION_TEMPLATE: &str = include_str!("../../assets/prompts/querygen.txt");

pub fn extraction_prompt(query: &str) -> String {
    EXTRACTION_TEMPLATE.replace("{query}", query.trim())
}

pub fn query_generation_prompt(rendered_graph: &str) -> String {
    QUERY_GENERATION_TEMPLATE.replace("{graph}", rendered_graph)
}

/// Hex SHA-256 over both templates.
pub fn prompt_hash() -> String {
    let mut h = Sha256::new();
    h.update(EXTRACTION_TEMPLATE.as_bytes());
    h.update([0]);
    h.update(QUERY_GENERATION_TEMPLATE.as_bytes());
    hex::encode(h.finalize())
}

/// One line per edge, `tail (Class) --link--> head (Class)`, using iri local
/// names, followed by one line per isolated node.
pub fn render_graph(g: &PrototypeGraph) -> String {
    let name = |iri: &str| crate::ontology::local_name(iri).to_string();
    let classes = g.class_of();
    let mut lines = Vec::new();
    let mut touched = HashSet::new();
    for e in g.edges() {
        touched.insert(e.tail.as_str());
        touched.insert(e.head.as_str());
        lines.push(format!(
            "{} ({}) --{}--> {} ({})",
            e.tail,
            name(classes[e.tail.as_str()]),
            name(&e.link),
            e.head,
            name(classes[e.head.as_str()])
        ));
    }
    for n in g.nodes() {
        if !touched.contains(n.id.as_str()) {
            lines.push(format!("{} ({})", n.id, name(&n.class)));
        }
    }
    lines.join("\n")
}

/// First non-empty line, without surrounding quotes or a `Request:` prefix.
pub fn clean_completion(text: &str) -> String {
    let line = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let line = line.strip_prefix("Request:").map(str::trim).unwrap_or(line);
    line.trim_matches(|c| c == '"' || c == '\'' || c == '“' || c == '”').trim().to_string()
}
