use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use oxrdf::{NamedOrBlankNode, Term, Triple};
use oxttl::{NTriplesParser, TurtleParser};
use serde::Serialize;

use super::{ClassDef, LinkDef, OntologyError, OntologyIndex, SamplingMode};

const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
const RDF_PROPERTY: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#Property";
const RDFS_CLASS: &str = "http://www.w3.org/2000/01/rdf-schema#Class";
const RDFS_SUBCLASS: &str = "http://www.w3.org/2000/01/rdf-schema#subClassOf";
const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
const RDFS_COMMENT: &str = "http://www.w3.org/2000/01/rdf-schema#comment";
const RDFS_DOMAIN: &str = "http://www.w3.org/2000/01/rdf-schema#domain";
const RDFS_RANGE: &str = "http://www.w3.org/2000/01/rdf-schema#range";
const OWL_CLASS: &str = "http://www.w3.org/2002/07/owl#Class";
const OWL_OBJECT_PROPERTY: &str = "http://www.w3.org/2002/07/owl#ObjectProperty";
const OWL_DATATYPE_PROPERTY: &str = "http://www.w3.org/2002/07/owl#DatatypeProperty";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdfFormat {
    Turtle,
    NTriples,
}

impl RdfFormat {
    /// Guess from a file extension; anything other than `.nt` is read as Turtle.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("nt") => RdfFormat::NTriples,
            _ => RdfFormat::Turtle,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OntologySource {
    pub text: String,
    pub format: RdfFormat,
}

impl OntologySource {
    pub fn turtle(text: impl Into<String>) -> Self {
        Self { text: text.into(), format: RdfFormat::Turtle }
    }

    pub fn ntriples(text: impl Into<String>) -> Self {
        Self { text: text.into(), format: RdfFormat::NTriples }
    }

    pub fn from_file(path: &Path) -> Result<Self, OntologyError> {
        Ok(Self { text: std::fs::read_to_string(path)?, format: RdfFormat::from_path(path) })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DroppedLink {
    pub iri: String,
    pub reason: String,
}

/// Diagnostics collected while loading.
#[derive(Debug, Clone, Default, Serialize)]
pub struct LoadReport {
    pub dropped_links: Vec<DroppedLink>,
    /// Domain/range axioms beyond the first pair, which are ignored.
    pub ignored_axioms: Vec<String>,
    /// Count-table rows naming iris that are not in the ontology.
    pub unmatched_counts: Vec<String>,
}

#[derive(Default)]
struct Collected {
    declared_classes: BTreeSet<String>,
    subclass: Vec<(String, String)>,
    labels: HashMap<String, Vec<(Option<String>, String)>>,
    comments: HashMap<String, Vec<(Option<String>, String)>>,
    properties: BTreeSet<String>,
    datatype_properties: BTreeSet<String>,
    domains: BTreeMap<String, Vec<Option<String>>>,
    ranges: BTreeMap<String, Vec<Option<String>>>,
}

impl Collected {
    fn add(&mut self, triple: Triple) {
        let subject = match &triple.subject {
            NamedOrBlankNode::NamedNode(n) => n.as_str().to_string(),
            _ => return,
        };
        let object_iri = match &triple.object {
            Term::NamedNode(n) => Some(n.as_str().to_string()),
            _ => None,
        };
        match triple.predicate.as_str() {
            RDF_TYPE => match object_iri.as_deref() {
                Some(OWL_CLASS | RDFS_CLASS) => {
                    self.declared_classes.insert(subject);
                }
                Some(OWL_OBJECT_PROPERTY | RDF_PROPERTY) => {
                    self.properties.insert(subject);
                }
                Some(OWL_DATATYPE_PROPERTY) => {
                    self.datatype_properties.insert(subject);
                }
                _ => {}
            },
            RDFS_SUBCLASS => {
                if let Some(parent) = object_iri {
                    if parent != subject {
                        self.subclass.push((subject, parent));
                    }
                }
            }
            RDFS_LABEL | RDFS_COMMENT => {
                if let Term::Literal(lit) = &triple.object {
                    let target =
                        if triple.predicate.as_str() == RDFS_LABEL { &mut self.labels } else { &mut self.comments };
                    target
                        .entry(subject)
                        .or_default()
                        .push((lit.language().map(str::to_string), lit.value().to_string()));
                }
            }
            RDFS_DOMAIN => self.domains.entry(subject).or_default().push(object_iri),
            RDFS_RANGE => self.ranges.entry(subject).or_default().push(object_iri),
            _ => {}
        }
    }
}

fn pick_literal(values: Option<&Vec<(Option<String>, String)>>) -> Option<String> {
    let values = values?;
    values
        .iter()
        .find(|(lang, _)| lang.as_deref().is_some_and(|l| l.eq_ignore_ascii_case("en")))
        .or_else(|| values.iter().find(|(lang, _)| lang.is_none()))
        .or_else(|| values.first())
        .map(|(_, v)| v.trim().to_string())
}

pub fn local_name(iri: &str) -> &str {
    iri.rsplit(['#', '/']).find(|s| !s.is_empty()).unwrap_or(iri)
}

/// Parses one or more ontology documents plus an optional count table into an
/// index. Links lacking a resolvable domain or range are dropped and listed
/// in the returned report. Sampling mode is probabilistic when counts are
/// given, uniform otherwise.
pub fn load_ontology(
    sources: &[OntologySource],
    counts: Option<&HashMap<String, u64>>,
) -> Result<(OntologyIndex, LoadReport), OntologyError> {
    let mut collected = Collected::default();
    for source in sources {
        match source.format {
            RdfFormat::Turtle => {
                for triple in TurtleParser::new().for_slice(source.text.as_bytes()) {
                    collected.add(triple.map_err(|e| OntologyError::Parse(e.to_string()))?);
                }
            }
            RdfFormat::NTriples => {
                for triple in NTriplesParser::new().for_slice(source.text.as_bytes()) {
                    collected.add(triple.map_err(|e| OntologyError::Parse(e.to_string()))?);
                }
            }
        }
    }

    let mut report = LoadReport::default();
    let mut class_iris = collected.declared_classes.clone();
    for (sub, sup) in &collected.subclass {
        class_iris.insert(sub.clone());
        class_iris.insert(sup.clone());
    }
    if class_iris.is_empty() {
        return Err(OntologyError::Empty);
    }

    let mut parents: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for (sub, sup) in &collected.subclass {
        parents.entry(sub.as_str()).or_default().insert(sup.clone());
    }

    let count_of = |iri: &str| counts.and_then(|c| c.get(iri)).copied().unwrap_or(0);

    let classes: Vec<ClassDef> = class_iris
        .iter()
        .map(|iri| ClassDef {
            iri: iri.clone(),
            label: pick_literal(collected.labels.get(iri)).unwrap_or_else(|| local_name(iri).to_string()),
            description: pick_literal(collected.comments.get(iri)).unwrap_or_default(),
            parents: parents.get(iri.as_str()).cloned().unwrap_or_default(),
            instance_count: count_of(iri),
        })
        .collect();

    let mut property_iris: BTreeSet<String> = collected.properties.clone();
    property_iris.extend(collected.domains.keys().cloned());
    property_iris.extend(collected.ranges.keys().cloned());

    let mut links = Vec::new();
    for iri in property_iris {
        if collected.datatype_properties.contains(&iri) {
            continue;
        }
        let resolve = |axioms: Option<&Vec<Option<String>>>, what: &str, report: &mut LoadReport| {
            let axioms = match axioms {
                Some(a) if !a.is_empty() => a,
                _ => return Err(format!("missing {what}")),
            };
            for extra in &axioms[1..] {
                report.ignored_axioms.push(format!("{iri}: extra {what} {}", extra.as_deref().unwrap_or("_:blank")));
            }
            match &axioms[0] {
                Some(c) if class_iris.contains(c) => Ok(c.clone()),
                Some(c) => Err(format!("{what} {c} is not a declared class")),
                None => Err(format!("{what} is not a named class")),
            }
        };
        let domain = resolve(collected.domains.get(&iri), "domain", &mut report);
        let range = resolve(collected.ranges.get(&iri), "range", &mut report);
        match (domain, range) {
            (Ok(from_type), Ok(to_type)) => links.push(LinkDef {
                label: pick_literal(collected.labels.get(&iri)).unwrap_or_else(|| local_name(&iri).to_string()),
                description: pick_literal(collected.comments.get(&iri)).unwrap_or_default(),
                instance_count: count_of(&iri),
                iri,
                from_type,
                to_type,
            }),
            (Err(reason), _) | (_, Err(reason)) => report.dropped_links.push(DroppedLink { iri, reason }),
        }
    }

    if let Some(counts) = counts {
        let link_iris: BTreeSet<&str> = links.iter().map(|l| l.iri.as_str()).collect();
        let mut unmatched: Vec<String> = counts
            .keys()
            .filter(|iri| !class_iris.contains(*iri) && !link_iris.contains(iri.as_str()))
            .cloned()
            .collect();
        unmatched.sort();
        report.unmatched_counts = unmatched;
    }

    let mode = if counts.is_some() { SamplingMode::Probabilistic } else { SamplingMode::Uniform };
    let index = OntologyIndex::new(classes, links, mode)?;
    Ok((index, report))
}

/// Parses a count table: one `iri<TAB>count` per line, `#` comments and
/// blank lines ignored.
pub fn parse_count_table(text: &str) -> Result<HashMap<String, u64>, OntologyError> {
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (iri, count) = line
            .split_once('\t')
            .ok_or_else(|| OntologyError::CountTable { line: i + 1, reason: "expected iri<TAB>count".into() })?;
        let count = count
            .trim()
            .parse::<u64>()
            .map_err(|e| OntologyError::CountTable { line: i + 1, reason: e.to_string() })?;
        out.insert(iri.trim().to_string(), count);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = r#"
        @prefix ex: <http://example.org/> .
        @prefix owl: <http://www.w3.org/2002/07/owl#> .
        @prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .
        ex:Person a owl:Class ; rdfs:label "Person" .
        ex:University a owl:Class ; rdfs:label "University"@en , "Universität"@de .
        ex:almaMater a owl:ObjectProperty ; rdfs:label "alma mater" ;
            rdfs:domain ex:Person ; rdfs:range ex:University .
    "#;

    #[test]
    fn toy_ontology_reads_back() {
        let (idx, report) = load_ontology(&[OntologySource::turtle(TOY)], None).unwrap();
        assert_eq!(idx.class_count(), 2);
        assert_eq!(idx.link_count(), 1);
        assert!(report.dropped_links.is_empty());
        assert_eq!(idx.class("http://example.org/University").unwrap().label, "University");
        assert_eq!(idx.sampling_mode(), SamplingMode::Uniform);
        assert_eq!(idx.describe("http://example.org/almaMater").unwrap(), "alma mater — from Person to University");
        assert_eq!(idx.describe("http://example.org/Person").unwrap(), "Person");
    }

    #[test]
    fn link_with_undeclared_range_is_dropped() {
        let doc = format!("{TOY}\nex:worksAt a owl:ObjectProperty ; rdfs:domain ex:Person ; rdfs:range ex:Company .");
        let (idx, report) = load_ontology(&[OntologySource::turtle(doc)], None).unwrap();
        assert_eq!(idx.link_count(), 1);
        assert_eq!(report.dropped_links.len(), 1);
        assert_eq!(report.dropped_links[0].iri, "http://example.org/worksAt");
    }

    #[test]
    fn link_missing_domain_is_dropped() {
        let doc = format!("{TOY}\nex:knows a owl:ObjectProperty ; rdfs:range ex:Person .");
        let (_, report) = load_ontology(&[OntologySource::turtle(doc)], None).unwrap();
        assert_eq!(report.dropped_links[0].reason, "missing domain");
    }

    #[test]
    fn extra_domain_is_ignored_and_reported() {
        let doc = format!("{TOY}\nex:knows rdfs:domain ex:Person , ex:University ; rdfs:range ex:Person .");
        let (idx, report) = load_ontology(&[OntologySource::turtle(doc)], None).unwrap();
        assert_eq!(idx.link("http://example.org/knows").unwrap().from_type, "http://example.org/Person");
        assert_eq!(report.ignored_axioms.len(), 1);
    }

    #[test]
    fn subclass_endpoints_are_classes() {
        let doc = "<http://e/A> <http://www.w3.org/2000/01/rdf-schema#subClassOf> <http://e/B> .\n";
        let (idx, _) = load_ontology(&[OntologySource::ntriples(doc)], None).unwrap();
        assert_eq!(idx.class_count(), 2);
        assert_eq!(idx.class("http://e/B").unwrap().label, "B");
        assert!(idx.subtypeof("http://e/A", "http://e/B").unwrap());
    }

    #[test]
    fn malformed_and_empty_documents_fail() {
        assert!(matches!(load_ontology(&[OntologySource::turtle("ex:a ex:b")], None), Err(OntologyError::Parse(_))));
        assert!(matches!(load_ontology(&[OntologySource::turtle("")], None), Err(OntologyError::Empty)));
    }

    #[test]
    fn counts_are_applied() {
        let counts = parse_count_table("# header\nhttp://example.org/Person\t42\n\nhttp://x/unused\t1\n").unwrap();
        let (idx, report) = load_ontology(&[OntologySource::turtle(TOY)], Some(&counts)).unwrap();
        assert_eq!(idx.class("http://example.org/Person").unwrap().instance_count, 42);
        assert_eq!(idx.class("http://example.org/University").unwrap().instance_count, 0);
        assert_eq!(report.unmatched_counts, ["http://x/unused"]);
        assert_eq!(idx.sampling_mode(), SamplingMode::Probabilistic);
    }

    #[test]
    fn count_table_rejects_bad_rows() {
        assert!(matches!(parse_count_table("http://x/a 12"), Err(OntologyError::CountTable { line: 1, .. })));
        assert!(parse_count_table("http://x/a\tmany").is_err());
    }

    #[test]
    fn local_names() {
        assert_eq!(local_name("http://dbpedia.org/ontology/almaMater"), "almaMater");
        assert_eq!(local_name("http://x.org/o#Thing"), "Thing");
    }
}
