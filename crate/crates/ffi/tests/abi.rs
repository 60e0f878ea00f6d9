use std::ffi::{c_char, CStr, CString};
use std::ptr;

use polycalm_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    pc_string_free(s);
    out
}

fn last_error() -> String {
    unsafe {
        CStr::from_ptr(pc_last_error())
            .to_str()
            .unwrap()
            .to_string()
    }
}

const ORTHANT: &str = r#"{"dim": 2, "ineq": [["-1", "0"], ["0", "-1"]]}"#;
const ABS_GRAPH: &str = r#"{"in_dim": 1, "out_dim": 1, "components": [
    {"dim": 2, "ineq": [{"a": ["-1", "0"], "b": "0"}], "eq": [{"a": ["-1", "1"], "b": "0"}]},
    {"dim": 2, "ineq": [{"a": ["1", "0"], "b": "0"}], "eq": [{"a": ["1", "1"], "b": "0"}]}
]}"#;

#[test]
fn cone_lifecycle() {
    unsafe {
        let mut k = ptr::null_mut();
        assert_eq!(pc_cone_from_json(c(ORTHANT).as_ptr(), &mut k), PcStatus::Ok);
        assert_eq!(pc_cone_dim(k), 2);
        let mut polar = ptr::null_mut();
        assert_eq!(pc_cone_polar(k, &mut polar), PcStatus::Ok);
        let mut inside = false;
        assert_eq!(
            pc_cone_contains(polar, c("-1/2,-3").as_ptr(), &mut inside),
            PcStatus::Ok
        );
        assert!(inside);
        assert_eq!(
            pc_cone_contains(k, c("-1/2,-3").as_ptr(), &mut inside),
            PcStatus::Ok
        );
        assert!(!inside);
        let mut json = ptr::null_mut();
        assert_eq!(pc_cone_to_json(polar, &mut json), PcStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
        assert_eq!(v["rays"], serde_json::json!([["-1", "0"], ["0", "-1"]]));
        pc_cone_free(polar);
        pc_cone_free(k);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut k = ptr::null_mut();
        assert_eq!(
            pc_cone_from_json(c("{\"dim\": 2").as_ptr(), &mut k),
            PcStatus::Parse
        );
        assert!(k.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(
            pc_cone_from_json(ptr::null(), &mut k),
            PcStatus::NullArgument
        );
        assert_eq!(pc_cone_from_json(c(ORTHANT).as_ptr(), &mut k), PcStatus::Ok);
        assert!(last_error().is_empty());
        let mut inside = false;
        assert_eq!(
            pc_cone_contains(k, c("1,2,3").as_ptr(), &mut inside),
            PcStatus::Precondition
        );
        assert!(last_error().contains("dimension"), "{}", last_error());
        assert_eq!(
            pc_cone_contains(k, c("1/0,2").as_ptr(), &mut inside),
            PcStatus::Parse
        );
        pc_cone_free(k);
        pc_cone_free(ptr::null_mut());
    }
}

#[test]
fn calmness_constant_of_absolute_value() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(
            pc_map_from_json(c(ABS_GRAPH).as_ptr(), &mut m),
            PcStatus::Ok
        );
        let mut kappa = ptr::null_mut();
        assert_eq!(
            pc_map_calmness_bound(m, c("0").as_ptr(), &mut kappa),
            PcStatus::Ok
        );
        let k: f64 = {
            let s = take(kappa);
            let (p, q) = s.split_once('/').map_or((s.as_str(), "1"), |(p, q)| (p, q));
            p.parse::<f64>().unwrap() / q.parse::<f64>().unwrap()
        };
        assert!((1.0..1.0 + 1e-6).contains(&k), "{k}");
        assert_eq!(
            pc_map_calmness_bound(m, c("1,1").as_ptr(), &mut kappa),
            PcStatus::Precondition
        );
        pc_map_free(m);
    }
}

#[test]
fn run_matches_command_line() {
    unsafe {
        let mut report = ptr::null_mut();
        let status = pc_run(
            c(r#"["verify", "suite", "--filter", "3.5"]"#).as_ptr(),
            &mut report,
        );
        assert_eq!(status, PcStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(report)).unwrap();
        assert_eq!(v["results"]["passed"], true);
        let status = pc_run(
            c(r#"["verify", "suite", "--filter", "3.5", "--mutate", "hessian-sign"]"#).as_ptr(),
            &mut report,
        );
        assert_eq!(status, PcStatus::Mismatch);
        assert!(!report.is_null());
        pc_string_free(report);
        assert_eq!(
            pc_run(c(r#"["cone", "nonsense"]"#).as_ptr(), &mut report),
            PcStatus::Parse
        );
        assert!(report.is_null());
        assert_eq!(
            pc_run(c(r#"["cone", "polar"]"#).as_ptr(), &mut report),
            PcStatus::Parse
        );
        pc_string_free(report);
    }
}

#[test]
fn version_and_header() {
    let v = unsafe { CStr::from_ptr(pc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/polycalm.h"))
            .unwrap();
    for name in [
        "pc_cone_from_json",
        "pc_map_calmness_bound",
        "pc_run",
        "typedef struct PcCone PcCone",
        "PC_STATUS_MISSING_CERTIFICATE = 2",
    ] {
        assert!(header.contains(name), "{name}");
    }
}
