//! C ABI over the onset engine.
//!
//! Every fallible call returns an [`OnsetStatus`] and writes its result
//! through an out pointer. On failure, [`onset_last_error`] describes the
//! problem. Strings returned to the caller must be released with
//! [`onset_string_free`], handles with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use onset_core::eval::{ged_score, EvalError};
use onset_core::grammar::static_schema_grammar;
use onset_core::graph::{correct_graph, to_sparql, validate_graph, GraphError, PrototypeGraph};
use onset_core::ontology::{load_ontology, parse_count_table, OntologyError, OntologyIndex, OntologySource};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnsetStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Input text (Turtle, count table, graph JSON) could not be parsed.
    ParseError = 3,
    /// A class or link iri is not part of the ontology.
    UnknownTerm = 4,
    /// A graph is structurally invalid (dangling edge, duplicate id, ...).
    InvalidGraph = 5,
    /// A graph is too large for exact edit distance.
    TooLarge = 6,
    /// A bug: the call panicked.
    Internal = 99,
}

/// A loaded ontology.
pub struct OnsetOntology {
    index: OntologyIndex,
}

/// A prototype graph.
pub struct OnsetGraph {
    graph: PrototypeGraph,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(OnsetStatus, String);

impl Failure {
    fn null(name: &str) -> Self {
        Failure(OnsetStatus::NullArgument, format!("`{name}` is null"))
    }
}

impl From<OntologyError> for Failure {
    fn from(e: OntologyError) -> Self {
        let status = match e {
            OntologyError::UnknownIri(_) => OnsetStatus::UnknownTerm,
            _ => OnsetStatus::ParseError,
        };
        Failure(status, e.to_string())
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        let status = match e {
            GraphError::Unresolved { .. } => OnsetStatus::UnknownTerm,
            GraphError::NotJson(_) | GraphError::Schema(_) => OnsetStatus::ParseError,
            GraphError::InvalidStage(_) | GraphError::DuplicateNode(_) | GraphError::DanglingEdge { .. } => {
                OnsetStatus::InvalidGraph
            }
        };
        Failure(status, e.to_string())
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        let status = match e {
            EvalError::GraphTooLarge { .. } => OnsetStatus::TooLarge,
            _ => OnsetStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

/// Runs `f`, translating failures and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OnsetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            OnsetStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal error (panic)");
            OnsetStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(OnsetStatus::InvalidUtf8, format!("`{name}`: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(name))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null(name));
    }
    out.write(value);
    Ok(())
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Message of the last failed call on this thread, or null. Owned by the
/// library and valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn onset_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn onset_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn onset_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads an ontology from Turtle text. `counts_tsv` (iri, tab, count per
/// line) may be null.
///
/// # Safety
/// String arguments must be null or nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn onset_ontology_load(
    turtle: *const c_char,
    counts_tsv: *const c_char,
    out: *mut *mut OnsetOntology,
) -> OnsetStatus {
    guard(|| {
        let ttl = str_arg(turtle, "turtle")?;
        let counts =
            if counts_tsv.is_null() { None } else { Some(parse_count_table(str_arg(counts_tsv, "counts_tsv")?)?) };
        let (index, _) = load_ontology(&[OntologySource::turtle(ttl)], counts.as_ref())?;
        write_out(out, Box::into_raw(Box::new(OnsetOntology { index })), "out")
    })
}

/// Loads a bundled ontology: `"dbpedia_excerpt"` or `"toy"`.
///
/// # Safety
/// `name` must be null or nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn onset_ontology_builtin(name: *const c_char, out: *mut *mut OnsetOntology) -> OnsetStatus {
    guard(|| {
        let index = match str_arg(name, "name")? {
            "dbpedia_excerpt" => onset_core::fixtures::dbpedia_excerpt().clone(),
            "toy" => onset_core::fixtures::toy().clone(),
            other => return Err(Failure(OnsetStatus::UnknownTerm, format!("no bundled ontology `{other}`"))),
        };
        write_out(out, Box::into_raw(Box::new(OnsetOntology { index })), "out")
    })
}

/// # Safety
/// `o` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn onset_ontology_free(o: *mut OnsetOntology) {
    if !o.is_null() {
        drop(Box::from_raw(o));
    }
}

/// Number of classes and links in the ontology.
///
/// # Safety
/// `o` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn onset_ontology_counts(
    o: *const OnsetOntology,
    classes: *mut usize,
    links: *mut usize,
) -> OnsetStatus {
    guard(|| {
        let o = ref_arg(o, "ontology")?;
        write_out(classes, o.index.class_count(), "classes")?;
        write_out(links, o.index.link_count(), "links")
    })
}

/// Whether `candidate` equals `ancestor` or is a (transitive) subclass of it.
///
/// # Safety
/// `o` must be a live handle; strings nul-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn onset_subtypeof(
    o: *const OnsetOntology,
    candidate: *const c_char,
    ancestor: *const c_char,
    out: *mut bool,
) -> OnsetStatus {
    guard(|| {
        let o = ref_arg(o, "ontology")?;
        let r = o.index.subtypeof(str_arg(candidate, "candidate")?, str_arg(ancestor, "ancestor")?)?;
        write_out(out, r, "out")
    })
}

/// Parses a graph from its JSON form
/// (`{"nodes":[{"id","class"}],"edges":[{"from","link","to"}],"stage"?}`).
///
/// # Safety
/// `json` must be nul-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn onset_graph_from_json(json: *const c_char, out: *mut *mut OnsetGraph) -> OnsetStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let graph: PrototypeGraph = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let status = if e.is_data() { OnsetStatus::InvalidGraph } else { OnsetStatus::ParseError };
            Failure(status, msg)
        })?;
        write_out(out, Box::into_raw(Box::new(OnsetGraph { graph })), "out")
    })
}

/// # Safety
/// `g` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn onset_graph_free(g: *mut OnsetGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Serializes a graph to JSON; release with [`onset_string_free`].
///
/// # Safety
/// `g` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn onset_graph_to_json(g: *const OnsetGraph, out: *mut *mut c_char) -> OnsetStatus {
    guard(|| {
        let g = ref_arg(g, "graph")?;
        let text = serde_json::to_string(&g.graph).map_err(|e| Failure(OnsetStatus::Internal, e.to_string()))?;
        write_out(out, into_c_string(text), "out")
    })
}

/// Validation report as JSON (`{"violations":[...]}`) and whether it is
/// empty. Either out pointer may be null when not wanted.
///
/// # Safety
/// Handles must be live; non-null out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn onset_validate(
    o: *const OnsetOntology,
    g: *const OnsetGraph,
    valid: *mut bool,
    report_json: *mut *mut c_char,
) -> OnsetStatus {
    guard(|| {
        let o = ref_arg(o, "ontology")?;
        let g = ref_arg(g, "graph")?;
        let report = validate_graph(&g.graph, &o.index);
        if !valid.is_null() {
            valid.write(report.is_valid());
        }
        if !report_json.is_null() {
            let text = serde_json::to_string(&report).map_err(|e| Failure(OnsetStatus::Internal, e.to_string()))?;
            report_json.write(into_c_string(text));
        }
        Ok(())
    })
}

/// Reverses flipped edges and drops invalid ones into a new graph handle.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn onset_correct(
    o: *const OnsetOntology,
    g: *const OnsetGraph,
    out: *mut *mut OnsetGraph,
) -> OnsetStatus {
    guard(|| {
        let o = ref_arg(o, "ontology")?;
        let g = ref_arg(g, "graph")?;
        let graph = correct_graph(&g.graph, &o.index)?;
        write_out(out, Box::into_raw(Box::new(OnsetGraph { graph })), "out")
    })
}

/// SELECT query for a corrected or sampled graph.
///
/// # Safety
/// `g` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn onset_to_sparql(g: *const OnsetGraph, out: *mut *mut c_char) -> OnsetStatus {
    guard(|| {
        let g = ref_arg(g, "graph")?;
        write_out(out, into_c_string(to_sparql(&g.graph)?), "out")
    })
}

/// GBNF grammar for open-vocabulary graph extraction.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn onset_static_grammar(out: *mut *mut c_char) -> OnsetStatus {
    guard(|| write_out(out, into_c_string(static_schema_grammar().text), "out"))
}

/// Normalized graph edit distance similarity in [0, 1].
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn onset_ged_score(a: *const OnsetGraph, b: *const OnsetGraph, out: *mut f64) -> OnsetStatus {
    guard(|| {
        let a = ref_arg(a, "a")?;
        let b = ref_arg(b, "b")?;
        write_out(out, ged_score(&a.graph, &b.graph)?, "out")
    })
}
