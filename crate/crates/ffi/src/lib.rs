//! C ABI over the grapheye library.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free` function. Every fallible call returns a [`GeStatus`];
//! on failure [`ge_last_error`] describes the problem for the calling thread.
//! Strings returned through out-parameters must be released with
//! [`ge_string_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use grapheye::cpg::{build_cpg, to_dot, PropertyGraph};
use grapheye::datakit::Label;
use grapheye::frontend::parse_unit;
use grapheye::gcgat::GcGatModel;
use grapheye::veccpg::{FunctionVocabulary, VecCpg};
use libc::{c_char, c_int, size_t};

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Graph = 5,
    Model = 6,
    NotFound = 7,
    Json = 8,
    Panic = 9,
}

/// Trained classifier.
pub struct GeModel {
    inner: GcGatModel,
}

/// Code property graph of one function.
pub struct GeGraph {
    inner: PropertyGraph,
}

/// Function vocabulary used for vectorization.
pub struct GeVocab {
    inner: FunctionVocabulary,
}

/// Classification result. `label` is 0 for good and 1 for bad.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GePrediction {
    pub label: c_int,
    pub prob_bad: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("nul bytes removed")));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(GeStatus, String);

impl From<grapheye::Error> for Failure {
    fn from(e: grapheye::Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn status_of(e: &grapheye::Error) -> GeStatus {
    use grapheye::Error as E;
    match e {
        E::Frontend(_) => GeStatus::Parse,
        E::Cfg(_) => GeStatus::Graph,
        E::Json(_) => GeStatus::Json,
        E::Io { .. } => GeStatus::Io,
        E::NoSuchFunction(_) => GeStatus::NotFound,
        E::InFile { source, .. } | E::Stage { source, .. } => status_of(source),
        _ => GeStatus::Model,
    }
}

fn null(what: &str) -> Failure {
    Failure(GeStatus::NullArgument, format!("`{what}` is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GeStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GeStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            GeStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(GeStatus::InvalidUtf8, format!("`{what}`: {e}")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn write_out<T>(out: *mut T, value: T) {
    ptr::write(out, value);
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ge_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ge_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ge_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a model saved as JSON.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ge_model_load(path: *const c_char, out: *mut *mut GeModel) -> GeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let inner = GcGatModel::load(Path::new(path))?;
        write_out(out, Box::into_raw(Box::new(GeModel { inner })));
        Ok(())
    })
}

/// Builds a model from its JSON text.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ge_model_from_json(json: *const c_char, out: *mut *mut GeModel) -> GeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?;
        let inner = GcGatModel::from_json(text).map_err(grapheye::Error::from)?;
        write_out(out, Box::into_raw(Box::new(GeModel { inner })));
        Ok(())
    })
}

/// # Safety
/// `model` must come from `ge_model_load`/`ge_model_from_json` or be null.
#[no_mangle]
pub unsafe extern "C" fn ge_model_free(model: *mut GeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Classifies a graph.
///
/// # Safety
/// `model` and `graph` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ge_model_predict(model: *const GeModel, graph: *const GeGraph, out: *mut GePrediction) -> GeStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let graph = graph.as_ref().ok_or_else(|| null("graph"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let p = model.inner.predict(&graph.inner).map_err(grapheye::Error::from)?;
        let label = match p.class {
            Label::Good => 0,
            Label::Bad => 1,
        };
        write_out(out, GePrediction { label, prob_bad: p.prob_bad });
        Ok(())
    })
}

/// Parses C source text and builds the graph of one function. With a null
/// `function`, the source must define exactly one function.
///
/// # Safety
/// `source` must be a nul-terminated string, `function` null or
/// nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ge_graph_from_source(
    source: *const c_char,
    function: *const c_char,
    out: *mut *mut GeGraph,
) -> GeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let source = str_arg(source, "source")?;
        let function = opt_str_arg(function, "function")?;
        let functions = parse_unit(source).map_err(grapheye::Error::from)?;
        let ast = match function {
            Some(name) => functions
                .iter()
                .find(|f| f.name == name || f.name.rsplit("::").next() == Some(name))
                .ok_or_else(|| Failure(GeStatus::NotFound, format!("function `{name}` not found")))?,
            None if functions.len() == 1 => &functions[0],
            None => {
                return Err(Failure(
                    GeStatus::NotFound,
                    format!("source defines {} functions; name one", functions.len()),
                ))
            }
        };
        let inner = build_cpg(ast).map_err(grapheye::Error::from)?;
        write_out(out, Box::into_raw(Box::new(GeGraph { inner })));
        Ok(())
    })
}

/// # Safety
/// `graph` must come from `ge_graph_from_source` or be null.
#[no_mangle]
pub unsafe extern "C" fn ge_graph_free(graph: *mut GeGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Number of nodes in the graph, or 0 for a null handle.
///
/// # Safety
/// `graph` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ge_graph_num_nodes(graph: *const GeGraph) -> size_t {
    graph.as_ref().map_or(0, |g| g.inner.len())
}

/// Serializes the graph as JSON.
///
/// # Safety
/// `graph` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ge_graph_to_json(graph: *const GeGraph, out: *mut *mut c_char) -> GeStatus {
    guard(|| {
        let graph = graph.as_ref().ok_or_else(|| null("graph"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_out(out, into_c_string(graph.inner.to_json_value().to_string()));
        Ok(())
    })
}

/// Renders the graph in Graphviz DOT.
///
/// # Safety
/// `graph` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ge_graph_to_dot(graph: *const GeGraph, out: *mut *mut c_char) -> GeStatus {
    guard(|| {
        let graph = graph.as_ref().ok_or_else(|| null("graph"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_out(out, into_c_string(to_dot(&graph.inner)));
        Ok(())
    })
}

/// Loads a function vocabulary from its JSON text.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ge_vocab_from_json(json: *const c_char, out: *mut *mut GeVocab) -> GeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?;
        let inner: FunctionVocabulary = serde_json::from_str(text).map_err(grapheye::Error::from)?;
        write_out(out, Box::into_raw(Box::new(GeVocab { inner })));
        Ok(())
    })
}

/// Vocabulary stored inside a model. The caller owns the result.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ge_model_vocab(model: *const GeModel, out: *mut *mut GeVocab) -> GeStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_out(out, Box::into_raw(Box::new(GeVocab { inner: model.inner.vocab.clone() })));
        Ok(())
    })
}

/// # Safety
/// `vocab` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ge_vocab_free(vocab: *mut GeVocab) {
    if !vocab.is_null() {
        drop(Box::from_raw(vocab));
    }
}

/// Vectorizes a graph into `{"x": [...], "a": [...]}` JSON.
///
/// # Safety
/// `graph` and `vocab` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ge_graph_vectorize_json(
    graph: *const GeGraph,
    vocab: *const GeVocab,
    out: *mut *mut c_char,
) -> GeStatus {
    guard(|| {
        let graph = graph.as_ref().ok_or_else(|| null("graph"))?;
        let vocab = vocab.as_ref().ok_or_else(|| null("vocab"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_out(out, into_c_string(VecCpg::new(&graph.inner, &vocab.inner).to_json_value().to_string()));
        Ok(())
    })
}
