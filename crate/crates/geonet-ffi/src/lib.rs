//! C ABI for the geonet library: opaque handles for nets and domains,
//! integer error codes, and a thread-local last-error message.
//!
//! The header `include/geonet.h` is generated from this file with
//! cbindgen (see `cbindgen.toml`). All functions are panic-safe: a panic
//! inside the library is caught and surfaced as `GEONET_ERR_INTERNAL`.
//!
//! Ownership rules: every `*_new`/`*_scramble`/`*_parse` result must be
//! released with the matching `*_free`; strings passed in are borrowed
//! NUL-terminated UTF-8; buffers passed in are caller-allocated.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use geonet::estimator::builtin_integrand;
use geonet::experiments::run_estimate;
use geonet::{
    default_depth, faure_generators, generate_net, map_net, read_net, scramble_net, verify_net,
    write_net, DigitalNet, FieldTable, ProductDomain, ScrambleKey,
};

/// Call succeeded.
pub const GEONET_OK: i32 = 0;
/// Invalid argument (bad base, dimension, spec string, digit file, ...).
pub const GEONET_ERR_INVALID: i32 = 1;
/// A property check failed (net verification found a bad box).
pub const GEONET_ERR_VIOLATION: i32 = 2;
/// A required pointer argument was NULL.
pub const GEONET_ERR_NULL: i32 = 3;
/// Output buffer too small.
pub const GEONET_ERR_BUFFER: i32 = 4;
/// Unexpected internal failure (caught panic).
pub const GEONET_ERR_INTERNAL: i32 = 5;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let cleaned: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(cleaned).unwrap_or_default();
    });
}

fn guard<F: FnOnce() -> i32>(f: F) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal panic".into());
            set_error(&msg);
            GEONET_ERR_INTERNAL
        }
    }
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, i32> {
    if ptr.is_null() {
        set_error("string argument is NULL");
        return Err(GEONET_ERR_NULL);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not UTF-8");
        GEONET_ERR_INVALID
    })
}

/// Opaque digital net handle.
pub struct GeonetNet {
    inner: DigitalNet,
}

/// Opaque product-domain handle.
pub struct GeonetDomain {
    inner: ProductDomain,
}

/// Replicated estimate summary returned by value.
#[repr(C)]
#[derive(Default)]
pub struct GeonetEstimate {
    pub n: u64,
    pub replications: u64,
    pub pooled_mean: f64,
    pub variance: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Copies the message of the most recent error on this thread into `buf`
/// (NUL-terminated, truncated to `cap`), returning the full length.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be NULL to query length.
#[no_mangle]
pub unsafe extern "C" fn geonet_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            // always terminate
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Builds the generalized Faure (0,m,s)-net in prime-power base `b` with
/// `depth` digits (`depth = 0` picks the default). On success stores a
/// handle in `out`.
///
/// # Safety
/// `out` must be a valid pointer to a `GeonetNet*` slot.
#[no_mangle]
pub unsafe extern "C" fn geonet_net_new(
    b: u8,
    s: usize,
    m: u32,
    depth: usize,
    out: *mut *mut GeonetNet,
) -> i32 {
    guard(|| {
        if out.is_null() {
            set_error("out is NULL");
            return GEONET_ERR_NULL;
        }
        let build = || -> Result<DigitalNet, String> {
            let field = FieldTable::new(b).map_err(|e| e.to_string())?;
            let gen = faure_generators(field, s, m as usize).map_err(|e| e.to_string())?;
            let depth = if depth == 0 {
                default_depth(b, m)
            } else {
                depth
            };
            generate_net(&gen, depth).map_err(|e| e.to_string())
        };
        match build() {
            Ok(net) => {
                *out = Box::into_raw(Box::new(GeonetNet { inner: net }));
                GEONET_OK
            }
            Err(msg) => {
                set_error(&msg);
                GEONET_ERR_INVALID
            }
        }
    })
}

/// Parses a net from the plain-text digit format.
///
/// # Safety
/// `text` is a NUL-terminated string; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn geonet_net_parse(text: *const c_char, out: *mut *mut GeonetNet) -> i32 {
    guard(|| {
        if out.is_null() {
            set_error("out is NULL");
            return GEONET_ERR_NULL;
        }
        let text = match cstr(text) {
            Ok(t) => t,
            Err(code) => return code,
        };
        match read_net(std::io::BufReader::new(text.as_bytes())) {
            Ok(net) => {
                *out = Box::into_raw(Box::new(GeonetNet { inner: net }));
                GEONET_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                GEONET_ERR_INVALID
            }
        }
    })
}

/// Frees a net handle; NULL is a no-op.
///
/// # Safety
/// `net` must have come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn geonet_net_free(net: *mut GeonetNet) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Number of points in the net.
///
/// # Safety
/// `net` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn geonet_net_points(net: *const GeonetNet) -> u64 {
    if net.is_null() {
        return 0;
    }
    (*net).inner.n() as u64
}

/// Applies a nested uniform scramble keyed by (seed, replication) and
/// stores the scrambled net as a fresh handle.
///
/// # Safety
/// `net` live handle; `out` valid slot.
#[no_mangle]
pub unsafe extern "C" fn geonet_net_scramble(
    net: *const GeonetNet,
    seed: u64,
    replication: u64,
    out: *mut *mut GeonetNet,
) -> i32 {
    guard(|| {
        if net.is_null() || out.is_null() {
            set_error("net or out is NULL");
            return GEONET_ERR_NULL;
        }
        let scrambled = scramble_net(&(*net).inner, &ScrambleKey::new(seed, replication));
        *out = Box::into_raw(Box::new(GeonetNet { inner: scrambled }));
        GEONET_OK
    })
}

/// Checks the (t,m,s) equidistribution property by exhaustive box
/// counting. Returns GEONET_OK when the property holds and
/// GEONET_ERR_VIOLATION (with the box in the error message) when not.
///
/// # Safety
/// `net` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn geonet_net_verify(net: *const GeonetNet, t: u32) -> i32 {
    guard(|| {
        if net.is_null() {
            set_error("net is NULL");
            return GEONET_ERR_NULL;
        }
        match verify_net(&(*net).inner, t) {
            Ok(check) if check.ok => GEONET_OK,
            Ok(check) => {
                set_error(&check.violation.map(|v| v.to_string()).unwrap_or_default());
                GEONET_ERR_VIOLATION
            }
            Err(e) => {
                set_error(&e.to_string());
                GEONET_ERR_INVALID
            }
        }
    })
}

/// Serializes the net in the plain-text digit format into `buf`
/// (NUL-terminated, truncated); returns the full length via `written`.
///
/// # Safety
/// `net` live handle; `buf` points to `cap` writable bytes or NULL;
/// `written` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn geonet_net_format(
    net: *const GeonetNet,
    buf: *mut c_char,
    cap: usize,
    written: *mut usize,
) -> i32 {
    guard(|| {
        if net.is_null() || written.is_null() {
            set_error("net or written is NULL");
            return GEONET_ERR_NULL;
        }
        let mut bytes = Vec::new();
        if write_net(&(*net).inner, &[], &mut bytes).is_err() {
            set_error("formatting failed");
            return GEONET_ERR_INTERNAL;
        }
        bytes.push(0);
        *written = bytes.len();
        if buf.is_null() {
            return GEONET_OK;
        }
        if cap < bytes.len() {
            set_error("buffer too small");
            return GEONET_ERR_BUFFER;
        }
        ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, bytes.len());
        GEONET_OK
    })
}

/// Parses a domain spec (shorthand like "T2^2" or the one-component-per-
/// line file format) into an opaque handle.
///
/// # Safety
/// `spec` NUL-terminated string; `out` valid slot.
#[no_mangle]
pub unsafe extern "C" fn geonet_domain_parse(
    spec: *const c_char,
    default_base: u8,
    out: *mut *mut GeonetDomain,
) -> i32 {
    guard(|| {
        if out.is_null() {
            set_error("out is NULL");
            return GEONET_ERR_NULL;
        }
        let spec = match cstr(spec) {
            Ok(s) => s,
            Err(code) => return code,
        };
        match ProductDomain::parse(spec, default_base) {
            Ok(dom) => {
                *out = Box::into_raw(Box::new(GeonetDomain { inner: dom }));
                GEONET_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                GEONET_ERR_INVALID
            }
        }
    })
}

/// Frees a domain handle; NULL is a no-op.
///
/// # Safety
/// `dom` must have come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn geonet_domain_free(dom: *mut GeonetDomain) {
    if !dom.is_null() {
        drop(Box::from_raw(dom));
    }
}

/// Total coordinate dimension of the domain (sum over components).
///
/// # Safety
/// `dom` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn geonet_domain_dim(dom: *const GeonetDomain) -> usize {
    if dom.is_null() {
        return 0;
    }
    (*dom).inner.total_dim()
}

/// Maps every net point into the domain, writing n * dim doubles
/// row-major into `buf`.
///
/// # Safety
/// `net` and `dom` live handles; `buf` points to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn geonet_map_points(
    net: *const GeonetNet,
    dom: *const GeonetDomain,
    buf: *mut f64,
    cap: usize,
) -> i32 {
    guard(|| {
        if net.is_null() || dom.is_null() || buf.is_null() {
            set_error("net, dom, or buf is NULL");
            return GEONET_ERR_NULL;
        }
        let net = &(*net).inner;
        let dom = &(*dom).inner;
        let needed = net.n() * dom.total_dim();
        if cap < needed {
            set_error("point buffer too small");
            return GEONET_ERR_BUFFER;
        }
        match map_net(net, dom) {
            Ok(points) => {
                for i in 0..points.len() {
                    let row = points.point(i);
                    ptr::copy_nonoverlapping(row.as_ptr(), buf.add(i * row.len()), row.len());
                }
                GEONET_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                GEONET_ERR_INVALID
            }
        }
    })
}

/// Runs a replicated scrambled-net estimate of a built-in integrand
/// ("tri-poly", "tri-exp", "x1", "x1x2", "const", "const:c") over a
/// domain spec, filling the summary struct.
///
/// # Safety
/// Strings NUL-terminated; `out` a valid struct pointer.
#[no_mangle]
pub unsafe extern "C" fn geonet_estimate_builtin(
    integrand: *const c_char,
    domain_spec: *const c_char,
    base: u8,
    m: u32,
    replications: u64,
    seed: u64,
    alpha: f64,
    out: *mut GeonetEstimate,
) -> i32 {
    guard(|| {
        if out.is_null() {
            set_error("out is NULL");
            return GEONET_ERR_NULL;
        }
        let name = match cstr(integrand) {
            Ok(s) => s,
            Err(code) => return code,
        };
        let spec = match cstr(domain_spec) {
            Ok(s) => s,
            Err(code) => return code,
        };
        let Some(built) = builtin_integrand(name) else {
            set_error(&format!("unknown built-in integrand {:?}", name));
            return GEONET_ERR_INVALID;
        };
        let dom = match ProductDomain::parse(spec, base) {
            Ok(d) => d,
            Err(e) => {
                set_error(&e.to_string());
                return GEONET_ERR_INVALID;
            }
        };
        match run_estimate(
            &built.integrand,
            &dom,
            m,
            replications as usize,
            seed,
            alpha,
            false,
            1,
        ) {
            Ok(report) => {
                *out = GeonetEstimate {
                    n: report.n as u64,
                    replications: report.replications as u64,
                    pooled_mean: report.pooled_mean,
                    variance: report.variance,
                    ci_lo: report.ci_lo,
                    ci_hi: report.ci_hi,
                };
                GEONET_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                GEONET_ERR_INVALID
            }
        }
    })
}

/// Closed-form gain coefficient of a (0,m,s)-net in base b for subset
/// size u and level sum k; NaN for invalid arguments.
#[no_mangle]
pub extern "C" fn geonet_gain_closed_form(b: u8, m: u32, u: usize, k: u32) -> f64 {
    if b < 2 || u == 0 {
        return f64::NAN;
    }
    geonet::analysis::closed_form_gain(b, m, u, k).to_f64()
}

/// Inverse standard normal CDF (Acklam's approximation).
#[no_mangle]
pub extern "C" fn geonet_normal_quantile(p: f64) -> f64 {
    geonet::stats::normal_quantile(p)
}
