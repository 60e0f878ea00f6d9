//! C ABI over the polycalm core.
//!
//! Objects cross the boundary as opaque handles owned by the caller and released with the
//! matching `*_free`. Strings returned through out-parameters are released with
//! [`pc_string_free`]. Every entry point returns a [`PcStatus`]; on failure the message is
//! available from [`pc_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use polycalm::cli::format::{cone_json, format_rat, parse_vector, ConeSpec, MapSpec};
use polycalm::cli::{exit_code, Cli};
use polycalm::geometry::PolyCone;
use polycalm::maps::{calmness_bound, PolyMap};
use polycalm::Error;

/// Result of a call. Values 0 to 4 coincide with the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PcStatus {
    Ok = 0,
    Mismatch = 1,
    MissingCertificate = 2,
    Precondition = 3,
    Parse = 4,
    NullArgument = 5,
    Internal = 6,
}

impl PcStatus {
    fn from_code(code: i32) -> Self {
        match code {
            0 => PcStatus::Ok,
            1 => PcStatus::Mismatch,
            2 => PcStatus::MissingCertificate,
            3 => PcStatus::Precondition,
            4 => PcStatus::Parse,
            _ => PcStatus::Internal,
        }
    }
}

/// A closed convex polyhedral cone.
pub struct PcCone(PolyCone);

/// A polyhedral set-valued map given by its graph.
pub struct PcMap(PolyMap);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(PcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(PcStatus::from_code(exit_code(&e)), e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<PcStatus, Failure>) -> PcStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(Failure(s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            PcStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(PcStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(PcStatus::Parse, format!("{name} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(PcStatus::NullArgument, format!("{name} is null")))
}

fn out_ptr<T>(p: *mut T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(PcStatus::NullArgument, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(s: &str, what: &str) -> Result<T, Failure> {
    serde_json::from_str(s).map_err(|e| Failure(PcStatus::Parse, format!("{what}: {e}")))
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s).expect("no interior nul").into_raw()
}

fn point(s: &str, dim: usize) -> Result<Vec<polycalm::geometry::Q>, Failure> {
    let v = parse_vector(s).map_err(|e| Failure(PcStatus::Parse, format!("point: {e}")))?;
    if v.len() != dim {
        return Err(Error::Dimension {
            context: "point",
            expected: dim,
            found: v.len(),
        }
        .into());
    }
    Ok(v)
}

/// Version of the library as a static string.
#[no_mangle]
pub extern "C" fn pc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a successful call.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn pc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a cone from a JSON object `{"dim", "ineq", "eq"}` or `{"dim", "rays", "lineality"}`
/// with rational entries written as `"p/q"` strings.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pc_cone_from_json(json: *const c_char, out: *mut *mut PcCone) -> PcStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let spec: ConeSpec = parse_json(text(json, "json")?, "cone")?;
        let cone = spec.build("cone")?;
        *out = Box::into_raw(Box::new(PcCone(cone)));
        Ok(PcStatus::Ok)
    })
}

/// Ambient dimension of the cone, 0 for null.
///
/// # Safety
/// `cone` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pc_cone_dim(cone: *const PcCone) -> usize {
    cone.as_ref().map_or(0, |c| c.0.dim())
}

/// Polar cone as a new handle.
///
/// # Safety
/// `cone` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pc_cone_polar(cone: *const PcCone, out: *mut *mut PcCone) -> PcStatus {
    guard(|| {
        let c = handle(cone, "cone")?;
        out_ptr(out, "out")?;
        *out = Box::into_raw(Box::new(PcCone(c.0.polar())));
        Ok(PcStatus::Ok)
    })
}

/// Exact membership of a point given as comma-separated rationals, e.g. `"1/2,-3"`.
///
/// # Safety
/// `cone` must be a live handle, `point` a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pc_cone_contains(
    cone: *const PcCone,
    point_text: *const c_char,
    out: *mut bool,
) -> PcStatus {
    guard(|| {
        let c = handle(cone, "cone")?;
        out_ptr(out, "out")?;
        let x = point(text(point_text, "point")?, c.0.dim())?;
        *out = c.0.contains(&x);
        Ok(PcStatus::Ok)
    })
}

/// Both representations of the cone as a JSON string, released with [`pc_string_free`].
///
/// # Safety
/// `cone` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pc_cone_to_json(cone: *const PcCone, out: *mut *mut c_char) -> PcStatus {
    guard(|| {
        let c = handle(cone, "cone")?;
        out_ptr(out, "out")?;
        *out = owned_string(cone_json(&c.0).to_string());
        Ok(PcStatus::Ok)
    })
}

/// Releases a cone. Null is ignored.
///
/// # Safety
/// `cone` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pc_cone_free(cone: *mut PcCone) {
    if !cone.is_null() {
        drop(Box::from_raw(cone));
    }
}

/// Builds a polyhedral map from a JSON object `{"in_dim", "out_dim", "components"}` whose
/// components are polyhedra in the graph space.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pc_map_from_json(json: *const c_char, out: *mut *mut PcMap) -> PcStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let spec: MapSpec = parse_json(text(json, "json")?, "map")?;
        let map = spec.build("map")?;
        *out = Box::into_raw(Box::new(PcMap(map)));
        Ok(PcStatus::Ok)
    })
}

/// Certified calmness constant at a domain point, written as a rational string `"p/q"`.
///
/// # Safety
/// `map` must be a live handle, `point` a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pc_map_calmness_bound(
    map: *const PcMap,
    point_text: *const c_char,
    out: *mut *mut c_char,
) -> PcStatus {
    guard(|| {
        let m = handle(map, "map")?;
        out_ptr(out, "out")?;
        let y = point(text(point_text, "point")?, m.0.in_dim())?;
        let bound = calmness_bound(&m.0, &y)?;
        *out = owned_string(format_rat(&bound.kappa));
        Ok(PcStatus::Ok)
    })
}

/// Releases a map. Null is ignored.
///
/// # Safety
/// `map` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pc_map_free(map: *mut PcMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Runs a command-line invocation given as a JSON array of arguments (without the program
/// name) and returns the JSON report. `--out` is ignored; the report always comes back in
/// `report`. The returned status is the command's exit code; `report` is set whenever the
/// arguments parse.
///
/// # Safety
/// `args_json` must be a nul-terminated string; `report` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pc_run(args_json: *const c_char, report: *mut *mut c_char) -> PcStatus {
    guard(|| {
        out_ptr(report, "report")?;
        *report = ptr::null_mut();
        let args: Vec<String> = parse_json(text(args_json, "args")?, "args")?;
        let cli = Cli::parse_args(std::iter::once("polycalm".to_string()).chain(args))
            .map_err(|e| Failure(PcStatus::Parse, e))?;
        let (code, text) = polycalm::cli::execute(&cli);
        *report = owned_string(text);
        let status = PcStatus::from_code(code);
        if status != PcStatus::Ok {
            let v: serde_json::Value =
                serde_json::from_str(&CStr::from_ptr(*report).to_string_lossy())
                    .unwrap_or_default();
            let msg = v["error"]["message"]
                .as_str()
                .map_or_else(|| format!("exit code {code}"), String::from);
            return Err(Failure(status, msg));
        }
        Ok(status)
    })
}
