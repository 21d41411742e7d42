//! C ABI for `fcp-core`.
//!
//! Networks and explanations cross the boundary as opaque handles that the
//! caller must release with the matching `*_free` function. Every entry point
//! returns an [`FcpStatus`]; on failure a message describing the last error on
//! the calling thread is available through [`fcp_last_error_message`].
//! Matrices are copied out row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fcp_core::attribution::lrp_epsilon;
use fcp_core::{explain, CompositionTrace, Error, Network, Vector};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Model = 4,
    NonFinite = 5,
    Degenerate = 6,
    Io = 7,
    Utf8 = 8,
    OutOfRange = 9,
    Panic = 10,
}

/// Opaque handle to a loaded network.
pub struct FcpNetwork {
    net: Network,
}

/// Opaque handle to the compositions computed for one instance.
pub struct FcpExplanation {
    trace: CompositionTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: FcpStatus,
    message: String,
}

impl Failure {
    fn new(status: FcpStatus, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Shape { .. } => FcpStatus::Shape,
            Error::NonFinite(_) => FcpStatus::NonFinite,
            Error::InvalidArgument(_) => FcpStatus::InvalidArgument,
            Error::Model { .. } | Error::Json(_) => FcpStatus::Model,
            Error::Degenerate(_) | Error::UndefinedCorrelation(_) => FcpStatus::Degenerate,
            Error::Io { .. } => FcpStatus::Io,
            _ => FcpStatus::InvalidArgument,
        };
        Failure::new(status, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `body`, translating errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> FcpStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => FcpStatus::Ok,
        Ok(Err(f)) => {
            set_last_error(&f.message);
            f.status
        }
        Err(_) => {
            set_last_error("internal panic");
            FcpStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::new(FcpStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::new(FcpStatus::NullPointer, format!("{what} is null")))
}

unsafe fn string_arg(p: *const c_char, what: &str) -> Result<String, Failure> {
    if p.is_null() {
        return Err(Failure::new(FcpStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure::new(FcpStatus::Utf8, format!("{what} is not valid UTF-8")))
}

unsafe fn instance(x: *const f64, len: usize) -> Result<Vector, Failure> {
    if x.is_null() {
        return Err(Failure::new(FcpStatus::NullPointer, "instance is null"));
    }
    Ok(Vector::new(std::slice::from_raw_parts(x, len).to_vec())?)
}

unsafe fn copy_out(values: &[f64], dst: *mut f64, dst_len: usize) -> Result<(), Failure> {
    if dst.is_null() {
        return Err(Failure::new(FcpStatus::NullPointer, "output buffer is null"));
    }
    if dst_len < values.len() {
        return Err(Failure::new(
            FcpStatus::Shape,
            format!("output buffer holds {dst_len} values, {} needed", values.len()),
        ));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), dst, values.len());
    Ok(())
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::new(FcpStatus::Utf8, "string contains NUL"))
}

/// Message for the most recent failure on this thread, or NULL.
///
/// The pointer stays valid until the next `fcp_*` call on the same thread.
#[no_mangle]
pub extern "C" fn fcp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fcp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a network from a JSON model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_net` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn fcp_network_load(path: *const c_char, out_net: *mut *mut FcpNetwork) -> FcpStatus {
    guard(|| {
        let path = string_arg(path, "path")?;
        let slot = out(out_net, "out_net")?;
        let net = Network::load(path)?;
        *slot = Box::into_raw(Box::new(FcpNetwork { net }));
        Ok(())
    })
}

/// Parses a network from a JSON model document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out_net` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn fcp_network_from_json(json: *const c_char, out_net: *mut *mut FcpNetwork) -> FcpStatus {
    guard(|| {
        let text = string_arg(json, "json")?;
        let slot = out(out_net, "out_net")?;
        let net = Network::from_json(&text)?;
        *slot = Box::into_raw(Box::new(FcpNetwork { net }));
        Ok(())
    })
}

/// Serializes a network to JSON. Release the result with [`fcp_string_free`].
///
/// # Safety
/// `net` must come from this library; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fcp_network_to_json(net: *const FcpNetwork, out_json: *mut *mut c_char) -> FcpStatus {
    guard(|| {
        let net = deref(net, "net")?;
        let slot = out(out_json, "out_json")?;
        *slot = into_c_string(net.net.to_json()?)?;
        Ok(())
    })
}

/// Releases a network. NULL is ignored.
///
/// # Safety
/// `net` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fcp_network_free(net: *mut FcpNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Input and output widths of a network.
///
/// # Safety
/// `net` must come from this library; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fcp_network_shape(
    net: *const FcpNetwork,
    out_inputs: *mut usize,
    out_outputs: *mut usize,
) -> FcpStatus {
    guard(|| {
        let net = deref(net, "net")?;
        *out(out_inputs, "out_inputs")? = net.net.input_width();
        *out(out_outputs, "out_outputs")? = net.net.output_width();
        Ok(())
    })
}

/// Writes the output-layer activations for instance `x` into `out_values`.
///
/// # Safety
/// `x` must hold `len` values and `out_values` must hold `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn fcp_network_forward(
    net: *const FcpNetwork,
    x: *const f64,
    len: usize,
    out_values: *mut f64,
    out_len: usize,
) -> FcpStatus {
    guard(|| {
        let net = deref(net, "net")?;
        let trace = net.net.forward(&instance(x, len)?)?;
        copy_out(trace.output().as_slice(), out_values, out_len)
    })
}

/// Predicted class (argmax of the output) for instance `x`.
///
/// # Safety
/// `x` must hold `len` values; `out_class` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fcp_network_predict(
    net: *const FcpNetwork,
    x: *const f64,
    len: usize,
    out_class: *mut usize,
) -> FcpStatus {
    guard(|| {
        let net = deref(net, "net")?;
        let slot = out(out_class, "out_class")?;
        *slot = net.net.predict(&instance(x, len)?)?;
        Ok(())
    })
}

/// LRP-epsilon relevance of each input feature for the predicted class.
///
/// # Safety
/// `x` must hold `len` values and `out_scores` must hold `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn fcp_lrp_epsilon(
    net: *const FcpNetwork,
    x: *const f64,
    len: usize,
    epsilon: f64,
    out_scores: *mut f64,
    out_len: usize,
) -> FcpStatus {
    guard(|| {
        let net = deref(net, "net")?;
        let relevance = lrp_epsilon(&net.net, &instance(x, len)?, epsilon)?;
        copy_out(&relevance.scores, out_scores, out_len)
    })
}

/// Computes the feature compositions of every neuron for instance `x`.
///
/// # Safety
/// `x` must hold `len` values; `out_explanation` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fcp_explain(
    net: *const FcpNetwork,
    x: *const f64,
    len: usize,
    out_explanation: *mut *mut FcpExplanation,
) -> FcpStatus {
    guard(|| {
        let net = deref(net, "net")?;
        let slot = out(out_explanation, "out_explanation")?;
        let trace = explain(&net.net, &instance(x, len)?)?;
        *slot = Box::into_raw(Box::new(FcpExplanation { trace }));
        Ok(())
    })
}

/// Releases an explanation. NULL is ignored.
///
/// # Safety
/// `explanation` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fcp_explanation_free(explanation: *mut FcpExplanation) {
    if !explanation.is_null() {
        drop(Box::from_raw(explanation));
    }
}

/// Number of composition matrices, including the input identity.
///
/// # Safety
/// `explanation` must come from this library; `out_count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fcp_explanation_layer_count(
    explanation: *const FcpExplanation,
    out_count: *mut usize,
) -> FcpStatus {
    guard(|| {
        let e = deref(explanation, "explanation")?;
        *out(out_count, "out_count")? = e.trace.layers().len();
        Ok(())
    })
}

fn layer_of(e: &FcpExplanation, layer: usize) -> Result<&fcp_core::Matrix, Failure> {
    e.trace.layers().get(layer).ok_or_else(|| {
        Failure::new(
            FcpStatus::OutOfRange,
            format!("layer {layer} out of range (have {})", e.trace.layers().len()),
        )
    })
}

/// Rows (neurons) and columns (features) of composition matrix `layer`.
///
/// # Safety
/// `explanation` must come from this library; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fcp_explanation_layer_shape(
    explanation: *const FcpExplanation,
    layer: usize,
    out_rows: *mut usize,
    out_cols: *mut usize,
) -> FcpStatus {
    guard(|| {
        let m = layer_of(deref(explanation, "explanation")?, layer)?;
        *out(out_rows, "out_rows")? = m.rows();
        *out(out_cols, "out_cols")? = m.cols();
        Ok(())
    })
}

/// Copies composition matrix `layer` row-major into `out_values`.
///
/// # Safety
/// `out_values` must hold `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn fcp_explanation_copy_layer(
    explanation: *const FcpExplanation,
    layer: usize,
    out_values: *mut f64,
    out_len: usize,
) -> FcpStatus {
    guard(|| {
        let m = layer_of(deref(explanation, "explanation")?, layer)?;
        copy_out(m.as_slice(), out_values, out_len)
    })
}

/// Whether neuron `row` of `layer` had zero composition mass.
///
/// # Safety
/// `explanation` must come from this library; `out_flag` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fcp_explanation_is_degenerate(
    explanation: *const FcpExplanation,
    layer: usize,
    row: usize,
    out_flag: *mut bool,
) -> FcpStatus {
    guard(|| {
        let e = deref(explanation, "explanation")?;
        let m = layer_of(e, layer)?;
        if row >= m.rows() {
            return Err(Failure::new(FcpStatus::OutOfRange, format!("row {row} out of range (have {})", m.rows())));
        }
        *out(out_flag, "out_flag")? = e.trace.is_degenerate(layer, row);
        Ok(())
    })
}

/// Class predicted by the network for the explained instance.
///
/// # Safety
/// `explanation` must come from this library; `out_class` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fcp_explanation_predicted_class(
    explanation: *const FcpExplanation,
    out_class: *mut usize,
) -> FcpStatus {
    guard(|| {
        let e = deref(explanation, "explanation")?;
        *out(out_class, "out_class")? = e.trace.predicted_class();
        Ok(())
    })
}

/// Serializes an explanation to JSON. Release the result with [`fcp_string_free`].
///
/// # Safety
/// `explanation` must come from this library; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fcp_explanation_to_json(
    explanation: *const FcpExplanation,
    out_json: *mut *mut c_char,
) -> FcpStatus {
    guard(|| {
        let e = deref(explanation, "explanation")?;
        let slot = out(out_json, "out_json")?;
        *slot = into_c_string(e.trace.to_json()?)?;
        Ok(())
    })
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fcp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
