//! C bindings for the markov-dsep library.
//!
//! The interface follows the usual opaque-handle shape: `md_model_from_json`
//! parses a model file and hands back an `MdModel*`, every fallible call
//! returns an [`MdStatus`], and the most recent failure on the current
//! thread can be retrieved as text through [`md_last_error_message`].
//! Strings returned through out-parameters are heap-allocated copies owned
//! by the caller; release them with [`md_string_free`], and release model
//! handles with [`md_model_free`].
//!
//! The generated header lives in `include/markov_dsep.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use markov_dsep::cli::dot::to_dot;
use markov_dsep::cli::format::{parse_model, to_model_json, AnyInterp, LoadError, LoadedModel};
use markov_dsep::dsep::{
    d_separated_by_cutting, d_separated_categorical, d_separated_classical, ClassicalError,
    DSepQuery, QueryError,
};
use markov_dsep::normalize::{normalize, CausalModel};

/// Status codes returned by every fallible function in this interface.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MdStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The input was not well-formed JSON for the model schema.
    Parse = 3,
    /// The input parsed but does not describe a valid causal model.
    InvalidModel = 4,
    /// A query referred to unknown wires or overlapping sets.
    BadQuery = 5,
    /// The requested method does not apply to this model.
    MethodInapplicable = 6,
    /// An internal invariant failed; this is a bug worth reporting.
    Internal = 7,
}

/// Which d-separation decider to run.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MdDsepMethod {
    /// The connectivity check on the conditioned diagram.
    Categorical = 0,
    /// The rewrite-based check that cuts the conditioned wires.
    Cutting = 1,
    /// Classical Bayes-ball on the underlying DAG; refuses models that are
    /// open, partially observed, or built from multi-output mechanisms.
    Classical = 2,
}

/// An opaque handle to a loaded causal model (plus its interpretation, when
/// the file carried one).
pub struct MdModel {
    model: CausalModel,
    interp: Option<AnyInterp>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn record_error(status: MdStatus, msg: impl Into<String>) -> MdStatus {
    let text = CString::new(msg.into())
        .unwrap_or_else(|_| CString::new("error message contained a NUL byte").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
    status
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Run a closure, translating a panic into [`MdStatus::Internal`] instead of
/// unwinding across the C boundary.
fn guarded<F: FnOnce() -> MdStatus>(f: F) -> MdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => record_error(MdStatus::Internal, "internal panic"),
    }
}

fn load_error(e: LoadError) -> MdStatus {
    let status = match &e {
        LoadError::Parse(_) | LoadError::Format(_) => MdStatus::Parse,
        LoadError::Invalid(_) => MdStatus::InvalidModel,
    };
    record_error(status, e.to_string())
}

fn query_error(e: QueryError) -> MdStatus {
    record_error(MdStatus::BadQuery, e.to_string())
}

fn classical_error(e: ClassicalError) -> MdStatus {
    match e {
        ClassicalError::Query(q) => query_error(q),
        other => record_error(MdStatus::MethodInapplicable, other.to_string()),
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, MdStatus> {
    if p.is_null() {
        return Err(record_error(MdStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        record_error(MdStatus::InvalidUtf8, format!("{what} is not valid UTF-8"))
    })
}

unsafe fn read_names(
    p: *const *const c_char,
    n: usize,
    what: &str,
) -> Result<Vec<String>, MdStatus> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(record_error(
            MdStatus::NullPointer,
            format!("{what} is NULL but its length is {n}"),
        ));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(read_str(*p.add(i), &format!("{what}[{i}]"))?.to_owned());
    }
    Ok(out)
}

unsafe fn hand_out(s: String, out: *mut *mut c_char) -> MdStatus {
    match CString::new(s) {
        Ok(c) => {
            *out = c.into_raw();
            MdStatus::Ok
        }
        Err(_) => record_error(MdStatus::Internal, "output contained a NUL byte"),
    }
}

/// The library version as a static NUL-terminated string. Do not free it.
#[no_mangle]
pub extern "C" fn md_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// A copy of the message recorded by the most recent failure on this
/// thread, or NULL when there is none. Free the copy with
/// [`md_string_free`].
#[no_mangle]
pub extern "C" fn md_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some(c) => c.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// Release a string previously returned through an out-parameter. NULL is
/// accepted and ignored.
///
/// # Safety
/// `s` must be a pointer obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn md_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse a model file (the same JSON schema the CLI reads) and store a
/// handle to the resulting causal model in `*out`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid location to
/// write a pointer to.
#[no_mangle]
pub unsafe extern "C" fn md_model_from_json(
    json: *const c_char,
    out: *mut *mut MdModel,
) -> MdStatus {
    clear_error();
    if out.is_null() {
        return record_error(MdStatus::NullPointer, "out is NULL");
    }
    *out = ptr::null_mut();
    let json = match read_str(json, "json") {
        Ok(s) => s,
        Err(status) => return status,
    };
    guarded(|| {
        let LoadedModel { diagram, interpretation } = match parse_model(json) {
            Ok(loaded) => loaded,
            Err(e) => return load_error(e),
        };
        let model = match CausalModel::new(diagram) {
            Ok(m) => m,
            Err(e) => {
                return record_error(MdStatus::InvalidModel, format!("not a causal model: {e}"))
            }
        };
        *out = Box::into_raw(Box::new(MdModel { model, interp: interpretation }));
        MdStatus::Ok
    })
}

/// Release a model handle. NULL is accepted and ignored.
///
/// # Safety
/// `m` must be a handle obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn md_model_free(m: *mut MdModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of wires in the model, or 0 for a NULL handle.
///
/// # Safety
/// `m` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn md_model_wire_count(m: *const MdModel) -> usize {
    m.as_ref().map_or(0, |m| m.model.diagram().wire_count())
}

/// Number of boxes in the model, or 0 for a NULL handle.
///
/// # Safety
/// `m` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn md_model_box_count(m: *const MdModel) -> usize {
    m.as_ref().map_or(0, |m| m.model.diagram().box_count())
}

/// Number of global input wires, or 0 for a NULL handle.
///
/// # Safety
/// `m` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn md_model_input_count(m: *const MdModel) -> usize {
    m.as_ref().map_or(0, |m| m.model.diagram().inputs().len())
}

/// Number of observed (output) wires, or 0 for a NULL handle.
///
/// # Safety
/// `m` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn md_model_output_count(m: *const MdModel) -> usize {
    m.as_ref().map_or(0, |m| m.model.diagram().outputs().len())
}

/// Whether every wire of the model is observed. False for a NULL handle.
///
/// # Safety
/// `m` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn md_model_is_pure_bloom(m: *const MdModel) -> bool {
    m.as_ref().is_some_and(|m| m.model.is_pure_bloom())
}

/// Decide whether the observed wires named in `x` and `y` are d-separated
/// given those in `z`, writing the verdict to `*out_separated`.
///
/// Name arrays may be NULL when their length is 0. The classical method
/// reports [`MdStatus::MethodInapplicable`] on models outside its scope;
/// the other two apply to every model.
///
/// # Safety
/// `m` must be a live handle; `x`, `y`, `z` must point to `nx`, `ny`, `nz`
/// NUL-terminated strings; `out_separated` must be a valid location to
/// write a bool to.
#[no_mangle]
pub unsafe extern "C" fn md_model_dsep(
    m: *const MdModel,
    method: MdDsepMethod,
    x: *const *const c_char,
    nx: usize,
    y: *const *const c_char,
    ny: usize,
    z: *const *const c_char,
    nz: usize,
    out_separated: *mut bool,
) -> MdStatus {
    clear_error();
    if m.is_null() {
        return record_error(MdStatus::NullPointer, "model is NULL");
    }
    if out_separated.is_null() {
        return record_error(MdStatus::NullPointer, "out_separated is NULL");
    }
    let (x, y, z) = match (|| {
        Ok((read_names(x, nx, "x")?, read_names(y, ny, "y")?, read_names(z, nz, "z")?))
    })() {
        Ok(sets) => sets,
        Err(status) => return status,
    };
    let model = &(*m).model;
    guarded(|| {
        let q = match DSepQuery::from_names(model.diagram(), &x, &y, &z) {
            Ok(q) => q,
            Err(e) => return query_error(e),
        };
        let verdict = match method {
            MdDsepMethod::Categorical => match d_separated_categorical(model, &q) {
                Ok(v) => v,
                Err(e) => return query_error(e),
            },
            MdDsepMethod::Cutting => match d_separated_by_cutting(model, &q) {
                Ok(v) => v,
                Err(e) => return query_error(e),
            },
            MdDsepMethod::Classical => match d_separated_classical(model, &q) {
                Ok(v) => v,
                Err(e) => return classical_error(e),
            },
        };
        *out_separated = verdict;
        MdStatus::Ok
    })
}

/// Serialize the model (and its interpretation, when present) back to the
/// JSON schema accepted by [`md_model_from_json`].
///
/// # Safety
/// `m` must be a live handle and `out` a valid location to write a pointer
/// to. Free the string with [`md_string_free`].
#[no_mangle]
pub unsafe extern "C" fn md_model_to_json(m: *const MdModel, out: *mut *mut c_char) -> MdStatus {
    clear_error();
    if m.is_null() || out.is_null() {
        return record_error(MdStatus::NullPointer, "model or out is NULL");
    }
    *out = ptr::null_mut();
    let handle = &*m;
    guarded(|| hand_out(to_model_json(handle.model.diagram(), handle.interp.as_ref()), out))
}

/// Render the model as Graphviz dot text.
///
/// # Safety
/// `m` must be a live handle and `out` a valid location to write a pointer
/// to. Free the string with [`md_string_free`].
#[no_mangle]
pub unsafe extern "C" fn md_model_to_dot(m: *const MdModel, out: *mut *mut c_char) -> MdStatus {
    clear_error();
    if m.is_null() || out.is_null() {
        return record_error(MdStatus::NullPointer, "model or out is NULL");
    }
    *out = ptr::null_mut();
    let handle = &*m;
    guarded(|| hand_out(to_dot(handle.model.diagram()), out))
}

/// Marginalize the model to the named observed wires and store the new
/// handle in `*out`. The input handle is left untouched.
///
/// # Safety
/// `m` must be a live handle; `keep` must point to `n` NUL-terminated
/// strings; `out` must be a valid location to write a pointer to.
#[no_mangle]
pub unsafe extern "C" fn md_model_marginalize(
    m: *const MdModel,
    keep: *const *const c_char,
    n: usize,
    out: *mut *mut MdModel,
) -> MdStatus {
    clear_error();
    if m.is_null() || out.is_null() {
        return record_error(MdStatus::NullPointer, "model or out is NULL");
    }
    *out = ptr::null_mut();
    let keep = match read_names(keep, n, "keep") {
        Ok(names) => names,
        Err(status) => return status,
    };
    let handle = &*m;
    guarded(|| match handle.model.marginalize_by_name(&keep) {
        Ok(model) => {
            *out = Box::into_raw(Box::new(MdModel { model, interp: handle.interp.clone() }));
            MdStatus::Ok
        }
        Err(e) => record_error(MdStatus::BadQuery, e.to_string()),
    })
}

/// Extend the output leg so every wire is observed, storing the new handle
/// in `*out`. The input handle is left untouched.
///
/// # Safety
/// `m` must be a live handle and `out` a valid location to write a pointer
/// to.
#[no_mangle]
pub unsafe extern "C" fn md_model_pure_bloom(
    m: *const MdModel,
    out: *mut *mut MdModel,
) -> MdStatus {
    clear_error();
    if m.is_null() || out.is_null() {
        return record_error(MdStatus::NullPointer, "model or out is NULL");
    }
    *out = ptr::null_mut();
    let handle = &*m;
    guarded(|| {
        let model = handle.model.pure_bloom_version();
        *out = Box::into_raw(Box::new(MdModel { model, interp: handle.interp.clone() }));
        MdStatus::Ok
    })
}

/// Parse a diagram file, reduce it to normal form, and return the result as
/// JSON. Unlike [`md_model_from_json`] this accepts diagrams that are not
/// causal models yet; normalizing is how they become one.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid location to
/// write a pointer to. Free the string with [`md_string_free`].
#[no_mangle]
pub unsafe extern "C" fn md_normalize_json(
    json: *const c_char,
    out: *mut *mut c_char,
) -> MdStatus {
    clear_error();
    if out.is_null() {
        return record_error(MdStatus::NullPointer, "out is NULL");
    }
    *out = ptr::null_mut();
    let json = match read_str(json, "json") {
        Ok(s) => s,
        Err(status) => return status,
    };
    guarded(|| {
        let LoadedModel { diagram, interpretation } = match parse_model(json) {
            Ok(loaded) => loaded,
            Err(e) => return load_error(e),
        };
        hand_out(to_model_json(&normalize(&diagram), interpretation.as_ref()), out)
    })
}
