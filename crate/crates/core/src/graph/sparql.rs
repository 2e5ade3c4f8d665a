use std::collections::{HashMap, HashSet};
use std::fmt::Write;

use super::{GraphError, PrototypeGraph, Stage};

/// Compiles a corrected or sampled graph into a `SELECT DISTINCT` query:
/// one variable per node, one triple pattern per edge, then one `a` pattern
/// per node, all in input order.
///
/// Node ids become variable names. Characters outside `[A-Za-z0-9_]` are
/// replaced by `_`; ids that collide after that get a numeric suffix.
pub fn to_sparql(g: &PrototypeGraph) -> Result<String, GraphError> {
    if !matches!(g.stage(), Stage::Corrected | Stage::Sampled) {
        return Err(GraphError::InvalidStage(g.stage()));
    }
    let vars = variable_names(g);
    let mut out = String::new();
    if g.nodes().is_empty() {
        out.push_str("SELECT * WHERE {\n}\n");
        return Ok(out);
    }
    out.push_str("SELECT DISTINCT");
    for node in g.nodes() {
        write!(out, " ?{}", vars[node.id.as_str()]).unwrap();
    }
    out.push_str(" WHERE {\n");
    for edge in g.edges() {
        writeln!(out, "    ?{} <{}> ?{}.", vars[edge.tail.as_str()], escape_iri(&edge.link), vars[edge.head.as_str()])
            .unwrap();
    }
    for node in g.nodes() {
        writeln!(out, "    ?{} a <{}>.", vars[node.id.as_str()], escape_iri(&node.class)).unwrap();
    }
    out.push_str("}\n");
    Ok(out)
}

/// Node id to SPARQL variable name (without the `?`).
pub(crate) fn variable_names(g: &PrototypeGraph) -> HashMap<&str, String> {
    let mut taken = HashSet::new();
    let mut out = HashMap::new();
    for node in g.nodes() {
        let mut base: String =
            node.id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
        if base.is_empty() {
            base.push('n');
        }
        let mut name = base.clone();
        let mut n = 2;
        while !taken.insert(name.clone()) {
            name = format!("{base}_{n}");
            n += 1;
        }
        out.insert(node.id.as_str(), name);
    }
    out
}

/// Percent-encodes characters that may not appear inside `<...>`.
fn escape_iri(iri: &str) -> String {
    let mut out = String::with_capacity(iri.len());
    for c in iri.chars() {
        if c <= ' ' || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\') {
            let mut buf = [0u8; 4];
            for b in c.encode_utf8(&mut buf).bytes() {
                write!(out, "%{b:02X}").unwrap();
            }
        } else {
            out.push(c);
        }
    }
    out
}
