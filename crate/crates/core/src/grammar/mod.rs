//! GBNF grammars that pin LM output to the graph JSON schema.
//!
//! The static grammar leaves class and link strings open; the constrained
//! grammar enumerates exactly the candidate labels. Neither can express
//! domain/range compatibility between nodes, so structural repair is left to
//! [`crate::graph::correct_graph`].

mod gbnf;
mod recognize;
mod sample;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::ontology::OntologyIndex;
use crate::semantic::CandidateSet;

pub use gbnf::{Atom, Grammar, Item, Repeat, Sequence};
pub use recognize::Recognizer;
pub use sample::{sample, SampleOptions};

pub const ROOT_RULE: &str = "root";

#[derive(Debug, Error, PartialEq)]
pub enum GrammarError {
    #[error("grammar parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("reference to undefined rule `{0}`")]
    UndefinedRule(String),
    #[error("root rule `{0}` is not defined")]
    MissingRoot(String),
    #[error("candidate class set is empty")]
    EmptyClassVocabulary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub classes: Vec<String>,
    pub links: Vec<String>,
}

/// Grammar source text plus the vocabulary it enumerates, if any.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrammarSpec {
    pub text: String,
    pub root_rule: String,
    pub vocab: Option<Vocabulary>,
}

const SHARED_RULES: &str = r#"root ::= "{" ws "\"nodes\"" ws ":" ws nodes ws "," ws "\"edges\"" ws ":" ws edges ws "}"
nodes ::= "[" ws ( node ( ws "," ws node )* )? ws "]"
node ::= "{" ws "\"id\"" ws ":" ws string ws "," ws "\"class\"" ws ":" ws class ws "}"
"#;

const EDGE_RULES: &str = r#"edges ::= "[" ws ( edge ( ws "," ws edge )* )? ws "]"
edge ::= "{" ws "\"from\"" ws ":" ws string ws "," ws "\"link\"" ws ":" ws link ws "," ws "\"to\"" ws ":" ws string ws "}"
"#;

const NO_EDGE_RULES: &str = "edges ::= \"[\" ws \"]\"\n";

const STRING_RULES: &str = r#"string ::= "\"" char* "\""
char ::= [^"\\\x00-\x1F] | "\\" ( ["\\/bfnrt] | "u" codeunit )
codeunit ::= [0-9a-cA-Ce-fE-F] hex hex hex | [dD] [0-7] hex hex
hex ::= [0-9a-fA-F]
ws ::= " "?
"#;

/// Open-vocabulary grammar for the first extraction pass.
pub fn static_schema_grammar() -> GrammarSpec {
    let text = format!("{SHARED_RULES}{EDGE_RULES}class ::= string\nlink ::= string\n{STRING_RULES}");
    GrammarSpec { text, root_rule: ROOT_RULE.into(), vocab: None }
}

/// Escapes a string for use inside a GBNF double-quoted literal.
fn gbnf_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 || c == '\u{7f}' => out.push_str(&format!("\\x{:02X}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// A label as it must appear in the JSON output (quotes included), written
/// as a GBNF literal.
fn json_string_terminal(label: &str) -> String {
    let json = serde_json::to_string(label).expect("string serialization cannot fail");
    gbnf_literal(&json)
}

fn dedup(labels: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    labels.into_iter().filter(|l| seen.insert(l.clone())).collect()
}

/// Grammar that only admits the candidate labels in `class` and `link`
/// positions. With no candidate links, `edges` must be an empty array.
pub fn constrained_grammar(candidates: &CandidateSet, index: &OntologyIndex) -> Result<GrammarSpec, GrammarError> {
    if candidates.classes.is_empty() {
        return Err(GrammarError::EmptyClassVocabulary);
    }
    let classes = dedup(
        candidates
            .classes
            .iter()
            .map(|c| index.class(&c.iri).map(|d| d.label.clone()).unwrap_or_else(|| c.label.clone())),
    );
    let links = dedup(
        candidates.links.iter().map(|l| index.link(&l.iri).map(|d| d.label.clone()).unwrap_or_else(|| l.label.clone())),
    );

    let alternation =
        |labels: &[String]| labels.iter().map(|l| json_string_terminal(l)).collect::<Vec<_>>().join(" | ");

    let mut text = String::from(SHARED_RULES);
    if links.is_empty() {
        text.push_str(NO_EDGE_RULES);
    } else {
        text.push_str(EDGE_RULES);
    }
    text.push_str(&format!("class ::= {}\n", alternation(&classes)));
    if !links.is_empty() {
        text.push_str(&format!("link ::= {}\n", alternation(&links)));
    }
    text.push_str(STRING_RULES);
    Ok(GrammarSpec { text, root_rule: ROOT_RULE.into(), vocab: Some(Vocabulary { classes, links }) })
}

impl GrammarSpec {
    pub fn compile(&self) -> Result<Grammar, GrammarError> {
        let g = Grammar::parse(&self.text)?;
        if g.rule(&self.root_rule).is_none() {
            return Err(GrammarError::MissingRoot(self.root_rule.clone()));
        }
        Ok(g)
    }

    /// Equivalent JSON Schema, for servers that take a schema instead of a
    /// grammar. Enumerations become `enum` constraints.
    pub fn json_schema(&self) -> serde_json::Value {
        let string = json!({"type": "string"});
        let (class, link, max_edges) = match &self.vocab {
            Some(v) => (
                json!({"type": "string", "enum": v.classes}),
                json!({"type": "string", "enum": v.links}),
                if v.links.is_empty() { Some(0) } else { None },
            ),
            None => (string.clone(), string.clone(), None),
        };
        let mut edges = json!({
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"from": string, "link": link, "to": string},
                "required": ["from", "link", "to"],
                "additionalProperties": false
            }
        });
        if let Some(max) = max_edges {
            edges["maxItems"] = json!(max);
        }
        json!({
            "type": "object",
            "properties": {
                "nodes": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {"id": string, "class": class},
                        "required": ["id", "class"],
                        "additionalProperties": false
                    }
                },
                "edges": edges
            },
            "required": ["nodes", "edges"],
            "additionalProperties": false
        })
    }
}

/// True iff `text` is in the language of `spec` from its root rule.
pub fn recognize(spec: &GrammarSpec, text: &str) -> Result<bool, GrammarError> {
    let g = spec.compile()?;
    Ok(Recognizer::new(&g, text).accepts(&spec.root_rule))
}

/// Draws one string from the language of `spec`.
pub fn sample_spec<R: Rng + ?Sized>(
    spec: &GrammarSpec,
    opts: &SampleOptions,
    rng: &mut R,
) -> Result<String, GrammarError> {
    let g = spec.compile()?;
    Ok(sample(&g, &spec.root_rule, opts, rng).expect("compiled grammar has a root"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, dbo};
    use crate::semantic::ScoredItem;

    fn item(iri: String, label: &str) -> ScoredItem {
        ScoredItem { iri, label: label.into(), score: 1.0 }
    }

    fn person_university() -> CandidateSet {
        CandidateSet {
            classes: vec![item(dbo("Person"), "person"), item(dbo("University"), "university")],
            links: vec![item(dbo("almaMater"), "alma mater")],
        }
    }

    #[test]
    fn static_grammar_examples() {
        let g = static_schema_grammar();
        assert!(recognize(&g, r#"{"nodes":[],"edges":[]}"#).unwrap());
        assert!(recognize(&g, r#"{"nodes":[{"id":"a","class":"anything at all"}],"edges":[]}"#).unwrap());
        assert!(recognize(
            &g,
            r#"{ "nodes" : [ {"id":"a","class":"x\"yé"} ] , "edges":[{"from":"a","link":"l","to":"a"}] }"#
        )
        .unwrap());
        assert!(!recognize(&g, r#"{"nodes":[{"id":1}]}"#).unwrap());
        assert!(!recognize(&g, r#"{"nodes":[{"id":"a","class":"b"}],"edges":[]} trailing"#).unwrap());
        assert!(!recognize(&g, "{\"nodes\":[{\"id\":\"a\",\"class\":\"raw\nnewline\"}],\"edges\":[]}").unwrap());
    }

    #[test]
    fn constrained_grammar_enumerates_labels() {
        let g = constrained_grammar(&person_university(), fixtures::dbpedia_excerpt()).unwrap();
        let ok = r#"{"nodes":[{"id":"p","class":"person"},{"id":"u","class":"university"}],"edges":[{"from":"p","link":"alma mater","to":"u"}]}"#;
        assert!(recognize(&g, ok).unwrap());
        let bad_class = r#"{"nodes":[{"id":"p","class":"animal"}],"edges":[]}"#;
        assert!(!recognize(&g, bad_class).unwrap());
        let bad_link = r#"{"nodes":[{"id":"p","class":"person"}],"edges":[{"from":"p","link":"spouse","to":"p"}]}"#;
        assert!(!recognize(&g, bad_link).unwrap());
        assert_eq!(g.vocab.as_ref().unwrap().classes, ["person", "university"]);
    }

    #[test]
    fn empty_link_vocabulary_forces_empty_edges() {
        let mut c = person_university();
        c.links.clear();
        let g = constrained_grammar(&c, fixtures::dbpedia_excerpt()).unwrap();
        assert!(recognize(&g, r#"{"nodes":[{"id":"p","class":"person"}],"edges":[]}"#).unwrap());
        assert!(!recognize(
            &g,
            r#"{"nodes":[{"id":"p","class":"person"}],"edges":[{"from":"p","link":"x","to":"p"}]}"#
        )
        .unwrap());
    }

    #[test]
    fn empty_class_vocabulary_is_an_error() {
        let c = CandidateSet::default();
        assert_eq!(constrained_grammar(&c, fixtures::dbpedia_excerpt()), Err(GrammarError::EmptyClassVocabulary));
    }

    #[test]
    fn unicode_escapes_exclude_surrogates() {
        let spec = static_schema_grammar();
        let doc = |id: &str| format!(r#"{{"nodes":[{{"id":"{id}","class":"c"}}],"edges":[]}}"#);
        assert!(recognize(&spec, &doc(r"\u00e9\u001F")).unwrap());
        for bad in [r"\uD800", r"\udce5", r"\uD83D\uDE00"] {
            assert!(!recognize(&spec, &doc(bad)).unwrap(), "{bad}");
        }
        assert!(recognize(&spec, &doc("😀")).unwrap());
    }

    #[test]
    fn awkward_labels_round_trip() {
        let idx = fixtures::dbpedia_excerpt();
        for label in ["say \"hi\"", "back\\slash", "tab\there", "new\nline", "ünïcödé 中", "ctrl\u{1}"] {
            let c = CandidateSet { classes: vec![item("urn:x".into(), label)], links: vec![] };
            let g = constrained_grammar(&c, idx).unwrap();
            let quoted = serde_json::to_string(label).unwrap();
            let doc = format!(r#"{{"nodes":[{{"id":"n","class":{quoted}}}],"edges":[]}}"#);
            assert!(recognize(&g, &doc).unwrap(), "{label:?} in {}", g.text);
            let parsed: serde_json::Value = serde_json::from_str(&doc).unwrap();
            assert_eq!(parsed["nodes"][0]["class"], label);
        }
    }

    #[test]
    fn duplicate_labels_are_enumerated_once() {
        let c =
            CandidateSet { classes: vec![item("urn:a".into(), "same"), item("urn:b".into(), "same")], links: vec![] };
        let g = constrained_grammar(&c, fixtures::dbpedia_excerpt()).unwrap();
        assert_eq!(g.text.matches("\\\"same\\\"").count(), 1);
    }

    #[test]
    fn compile_reports_missing_root() {
        let spec = GrammarSpec { text: "a ::= \"x\"\n".into(), root_rule: "root".into(), vocab: None };
        assert_eq!(recognize(&spec, "x"), Err(GrammarError::MissingRoot("root".into())));
    }

    #[test]
    fn json_schema_mirrors_vocabulary() {
        let g = constrained_grammar(&person_university(), fixtures::dbpedia_excerpt()).unwrap();
        let schema = g.json_schema();
        assert_eq!(schema["properties"]["nodes"]["items"]["properties"]["class"]["enum"][1], "university");
        assert!(static_schema_grammar().json_schema()["properties"]["edges"].get("maxItems").is_none());
    }
}
