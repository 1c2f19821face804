//! C ABI over `ekg-core`.
//!
//! Every function returns an [`EkgStatus`]. On failure a message is kept per
//! thread and can be read with [`ekg_last_error_message`]. Strings handed
//! out by the library are NUL-terminated UTF-8 and must be released with
//! [`ekg_string_free`]; graphs with [`ekg_graph_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ekg_core::aggregate::{self, filter_by_count, AggregatedGraph};
use ekg_core::export::{self, ExportSelection, Scope};
use ekg_core::pattern;
use ekg_core::pipeline::{run_pipeline, PipelineOptions};
use ekg_core::validate::{validate_with, Family, ValidateOptions};
use ekg_core::LabeledPropertyGraph;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EkgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    /// Malformed configuration, table, snapshot, or argument.
    Input = 4,
    /// Query parse or evaluation failure.
    Query = 5,
    /// A named entity, type, or class does not exist.
    NotFound = 6,
    /// The call panicked; the graph may be in an unspecified state.
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EkgFormat {
    Text = 0,
    Csv = 1,
}

/// Opaque graph handle.
pub struct EkgGraph {
    inner: LabeledPropertyGraph,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(EkgStatus, String);

impl Failure {
    fn new(status: EkgStatus, e: impl std::fmt::Display) -> Self {
        Failure(status, e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> EkgStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EkgStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal error");
            EkgStatus::Internal
        }
    }
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Failure::new(
            EkgStatus::NullPointer,
            format!("{name} is null"),
        ));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(EkgStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn opt_str_arg<'a>(p: *const c_char, name: &str) -> FfiResult<Option<&'a str>> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(Some)
    }
}

/// # Safety
/// `g` is null or a handle from this library.
unsafe fn graph_ref<'a>(g: *const EkgGraph) -> FfiResult<&'a EkgGraph> {
    g.as_ref()
        .ok_or_else(|| Failure::new(EkgStatus::NullPointer, "graph is null"))
}

/// # Safety
/// `g` is null or a handle from this library.
unsafe fn graph_mut<'a>(g: *mut EkgGraph) -> FfiResult<&'a mut EkgGraph> {
    g.as_mut()
        .ok_or_else(|| Failure::new(EkgStatus::NullPointer, "graph is null"))
}

/// # Safety
/// `out` is null or valid for writes.
unsafe fn put<T>(out: *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(Failure::new(
            EkgStatus::NullPointer,
            "output pointer is null",
        ));
    }
    out.write(value);
    Ok(())
}

/// # Safety
/// `out` is null or valid for writes.
unsafe fn put_string(out: *mut *mut c_char, s: String) -> FfiResult<()> {
    let c =
        CString::new(s).map_err(|_| Failure::new(EkgStatus::Internal, "output contains NUL"))?;
    put(out, c.into_raw())
}

fn list(s: Option<&str>) -> Vec<String> {
    s.map(|s| {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::to_owned)
            .collect()
    })
    .unwrap_or_default()
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn ekg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` is null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ekg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// An empty graph with the standard indexes.
#[no_mangle]
pub extern "C" fn ekg_graph_new() -> *mut EkgGraph {
    Box::into_raw(Box::new(EkgGraph {
        inner: LabeledPropertyGraph::new(),
    }))
}

/// # Safety
/// `g` is null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ekg_graph_free(g: *mut EkgGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Reads a snapshot written by [`ekg_graph_save`] or the CLI.
///
/// # Safety
/// `path` is a valid string; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ekg_graph_load(path: *const c_char, out: *mut *mut EkgGraph) -> EkgStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let g = LabeledPropertyGraph::load(path).map_err(|e| Failure::new(EkgStatus::Io, e))?;
        put(out, Box::into_raw(Box::new(EkgGraph { inner: g })))
    })
}

/// # Safety
/// `g` is a live handle; `path` is a valid string.
#[no_mangle]
pub unsafe extern "C" fn ekg_graph_save(g: *const EkgGraph, path: *const c_char) -> EkgStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let path = str_arg(path, "path")?;
        g.inner
            .save(path)
            .map_err(|e| Failure::new(EkgStatus::Io, e))
    })
}

/// Runs the full conversion. On success `*out` receives a new graph and
/// `*violations` (if not null) the number of constraint violations.
///
/// # Safety
/// String arguments are valid; `out` is valid for writes; `violations` is
/// null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ekg_pipeline_run(
    config_path: *const c_char,
    csv_path: *const c_char,
    out: *mut *mut EkgGraph,
    violations: *mut usize,
) -> EkgStatus {
    guard(|| {
        let config = str_arg(config_path, "config_path")?;
        let csv = str_arg(csv_path, "csv_path")?;
        if out.is_null() {
            return Err(Failure::new(
                EkgStatus::NullPointer,
                "output pointer is null",
            ));
        }
        let result = run_pipeline(
            Path::new(config),
            Path::new(csv),
            &PipelineOptions::default(),
            &mut |_| {},
        )
        .map_err(|e| Failure::new(EkgStatus::Input, e))?;
        if !violations.is_null() {
            violations.write(result.report.violations.len());
        }
        put(
            out,
            Box::into_raw(Box::new(EkgGraph {
                inner: result.graph,
            })),
        )
    })
}

/// # Safety
/// `g` is a live handle; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ekg_graph_node_count(g: *const EkgGraph, out: *mut usize) -> EkgStatus {
    guard(|| put(out, graph_ref(g)?.inner.node_count()))
}

/// # Safety
/// `g` is a live handle; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ekg_graph_relationship_count(
    g: *const EkgGraph,
    out: *mut usize,
) -> EkgStatus {
    guard(|| put(out, graph_ref(g)?.inner.relationship_count()))
}

/// Number of nodes carrying `label`.
///
/// # Safety
/// `g` is a live handle; `label` is a valid string; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ekg_graph_count_label(
    g: *const EkgGraph,
    label: *const c_char,
    out: *mut usize,
) -> EkgStatus {
    guard(|| {
        let g = graph_ref(g)?;
        put(out, g.inner.count_label(str_arg(label, "label")?))
    })
}

/// Number of relationships of `rel_type`.
///
/// # Safety
/// `g` is a live handle; `rel_type` is a valid string; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ekg_graph_count_type(
    g: *const EkgGraph,
    rel_type: *const c_char,
    out: *mut usize,
) -> EkgStatus {
    guard(|| {
        let g = graph_ref(g)?;
        put(out, g.inner.count_type(str_arg(rel_type, "rel_type")?))
    })
}

/// Validates the graph. `families` is a comma-separated list such as
/// `"V1,V3"`, or null for all. `*report` receives one line per finding and
/// `*count` the number of violations.
///
/// # Safety
/// `g` is a live handle; `families` is null or a valid string; `report`
/// and `count` are valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ekg_validate(
    g: *const EkgGraph,
    families: *const c_char,
    report: *mut *mut c_char,
    count: *mut usize,
) -> EkgStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let mut options = ValidateOptions::default();
        let wanted = list(opt_str_arg(families, "families")?);
        if !wanted.is_empty() {
            options.families = wanted
                .iter()
                .map(|f| f.parse::<Family>())
                .collect::<Result<_, _>>()
                .map_err(|e| Failure::new(EkgStatus::Input, e))?;
        }
        let r = validate_with(&g.inner, &options);
        put(count, r.violations.len())?;
        put_string(report, r.to_text())
    })
}

/// Evaluates a pattern query; `*result` receives the table.
///
/// # Safety
/// `g` is a live handle; `text` is a valid string; `result` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ekg_query(
    g: *const EkgGraph,
    text: *const c_char,
    format: EkgFormat,
    result: *mut *mut c_char,
) -> EkgStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let ast = pattern::parse(str_arg(text, "text")?)
            .map_err(|e| Failure::new(EkgStatus::Query, e))?;
        let table =
            pattern::evaluate(&g.inner, &ast).map_err(|e| Failure::new(EkgStatus::Query, e))?;
        put_string(
            result,
            match format {
                EkgFormat::Text => table.to_text(),
                EkgFormat::Csv => table.to_csv(),
            },
        )
    })
}

/// Aggregates DF edges of each listed entity type (comma-separated) into
/// DF_C edges over classes of `class_type`, modifying the graph. `*csv`
/// receives the edges with `count >= min_count`.
///
/// # Safety
/// `g` is a live handle; strings are valid; `csv` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ekg_aggregate(
    g: *mut EkgGraph,
    class_type: *const c_char,
    entity_types: *const c_char,
    min_count: i64,
    csv: *mut *mut c_char,
) -> EkgStatus {
    guard(|| {
        let g = graph_mut(g)?;
        let class_type = str_arg(class_type, "class_type")?;
        let types = list(Some(str_arg(entity_types, "entity_types")?));
        for t in &types {
            aggregate::aggregate_df(&mut g.inner, class_type, t)
                .map_err(|e| Failure::new(EkgStatus::NotFound, e))?;
        }
        let refs: Vec<&str> = types.iter().map(String::as_str).collect();
        let agg = filter_by_count(
            &AggregatedGraph::from_graph(&g.inner, class_type, &refs),
            min_count,
        );
        put_string(csv, agg.to_csv())
    })
}

fn selection(scope: Option<&str>) -> FfiResult<ExportSelection> {
    let scope: Scope = scope
        .unwrap_or("full")
        .parse()
        .map_err(|e| Failure::new(EkgStatus::Input, e))?;
    Ok(ExportSelection::new(scope))
}

fn export_failure(e: export::ExportError) -> Failure {
    match e {
        export::ExportError::UnknownSelection(_) => Failure::new(EkgStatus::NotFound, e),
        export::ExportError::Io(_) => Failure::new(EkgStatus::Io, e),
        _ => Failure::new(EkgStatus::Input, e),
    }
}

/// DOT text of the selection. `scope` uses the CLI syntax (`full`,
/// `entity=UID`, `entityType=T1,T2`, `aggregated=CLASS:T1[:MIN]`); null
/// means the whole graph.
///
/// # Safety
/// `g` is a live handle; `scope` is null or a valid string; `out` is valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn ekg_export_dot(
    g: *const EkgGraph,
    scope: *const c_char,
    out: *mut *mut c_char,
) -> EkgStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let sel = selection(opt_str_arg(scope, "scope")?)?;
        put_string(out, export::to_dot(&g.inner, &sel).map_err(export_failure)?)
    })
}

/// GraphML text of the selection; `scope` as for [`ekg_export_dot`].
///
/// # Safety
/// `g` is a live handle; `scope` is null or a valid string; `out` is valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn ekg_export_graphml(
    g: *const EkgGraph,
    scope: *const c_char,
    out: *mut *mut c_char,
) -> EkgStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let sel = selection(opt_str_arg(scope, "scope")?)?;
        put_string(
            out,
            export::to_graphml(&g.inner, &sel).map_err(export_failure)?,
        )
    })
}
