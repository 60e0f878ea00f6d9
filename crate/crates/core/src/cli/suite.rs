//! Gallery runner: recomputes every bundled example and compares with stored verdicts.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde_json::{json, Map, Value};

use super::format::{estimate_json, float, qv, schedule_json};
use super::{Flags, Outcome, EXIT_MISMATCH};
use crate::error::{Error, Result};
use crate::verify::examples::*;
use crate::verify::Schedule;

pub const IDS: [&str; 5] = ["2.5", "2.6", "3.2", "3.5", "4.4"];

const FIXTURE: &str = include_str!("../../fixtures/suite.json");

/// Relative comparison with an absolute floor for zero targets.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    if b == 0.0 {
        a.abs() <= 1e-12
    } else {
        (a - b).abs() <= tol * b.abs()
    }
}

pub fn expected() -> BTreeMap<String, Map<String, Value>> {
    serde_json::from_str(FIXTURE).expect("bundled fixture is valid")
}

/// Computes one gallery entry; `mutate = Some("hessian-sign")` flips the curvature term of the
/// nondegeneracy example.
pub fn entry(id: &str, sched: &Schedule, mutate: Option<&str>) -> Result<Value> {
    let mut checks = Map::new();
    let mut put = |k: &str, v: Value| {
        checks.insert(k.to_string(), v);
    };
    let details = match id {
        "2.5" => {
            let r = step_map_report(sched);
            put(
                "inner-calm-star-minus",
                float(r.inner_calm_star[0].estimate),
            );
            put("inner-calm-star-plus", float(r.inner_calm_star[1].estimate));
            put(
                "inner-calm-at-zero-diverges",
                json!(r.inner_calm_at_zero.iter().any(|e| e.diverges)),
            );
            json!({
                "inner_calm_star": r.inner_calm_star.iter().map(estimate_json).collect::<Vec<_>>(),
                "inner_calm_at_zero": r.inner_calm_at_zero.iter().map(estimate_json).collect::<Vec<_>>(),
            })
        }
        "2.6" => {
            let labels = ["pi/2", "pi", "3pi/2"];
            let mut rows = Vec::new();
            for (t, label) in CURVE_ANGLES.iter().zip(labels) {
                let m = curve_modulus_estimate(*t, sched);
                put(&format!("fuzzy-{label}"), float(m.fuzzy.estimate));
                put(&format!("non-fuzzy-{label}"), float(m.strict.estimate));
                put(&format!("closed-form-{label}"), float(m.expected));
                rows.push(json!({"t": t, "fuzzy": estimate_json(&m.fuzzy), "non_fuzzy": estimate_json(&m.strict)}));
            }
            let m = curve_modulus_estimate(TAU, sched);
            put("fuzzy-2pi", float(m.fuzzy.estimate));
            put(
                "non-fuzzy-2pi-diverges",
                json!(m.strict.diverges && m.strict.estimate > crate::verify::DIVERGENCE),
            );
            rows.push(json!({"t": TAU, "fuzzy": estimate_json(&m.fuzzy), "non_fuzzy": estimate_json(&m.strict)}));
            json!({"moduli": rows, "schedule": schedule_json(sched)})
        }
        "3.2" => {
            let levels = verify_not_inner_semicompact_example();
            let mut rows = Vec::new();
            for (l, label) in levels.iter().zip(["1/2", "1/4", "1/8"]) {
                put(
                    &format!("t={label}/stationary"),
                    json!(l.dh.abs() <= crate::verify::EPS),
                );
                put(
                    &format!("t={label}/derivative-matches-numeric"),
                    json!((l.dh - l.dh_numeric).abs() <= 1e-6),
                );
                put(
                    &format!("t={label}/concave"),
                    json!(l.d2h < 0.0 && (l.d2h - l.d2h_closed_form).abs() <= 1e-9),
                );
                put(
                    &format!("t={label}/equal-at-2pi"),
                    json!(l.h_at_two_pi_gap.abs() <= crate::verify::EPS),
                );
                put(
                    &format!("t={label}/hull-in-halfspace"),
                    json!(l.curve_violations == 0 && l.hull_violations == 0),
                );
                put(
                    &format!("t={label}/fiber-threshold"),
                    float(l.fiber_threshold),
                );
                put(
                    &format!("t={label}/threshold-below-1/t"),
                    json!(l.fiber_threshold < 1.0 / l.t),
                );
                rows.push(json!({
                    "t": l.t,
                    "dh": l.dh,
                    "dh_numeric": l.dh_numeric,
                    "d2h": l.d2h,
                    "d2h_closed_form": l.d2h_closed_form,
                    "h_at_two_pi_gap": l.h_at_two_pi_gap,
                    "curve_samples": l.curve_samples,
                    "hull_samples": l.hull_samples,
                    "fiber_threshold": l.fiber_threshold,
                    "stated_threshold": 1.0 / l.t,
                }));
            }
            json!({"levels": rows})
        }
        "3.5" => {
            let mut sys = directional_nondegeneracy_system();
            match mutate {
                None => {}
                Some("hessian-sign") => {
                    sys.g.negate_term(4, &[2, 0, 0, 0]);
                }
                Some(other) => {
                    return Err(Error::Parse {
                        location: "--mutate".into(),
                        message: format!("unknown mutation {other:?}"),
                    })
                }
            }
            let r = nondegeneracy_report(&sys, 50, sched.seed)?;
            put("degenerate-at-zero", json!(r.degenerate_at_zero));
            put("kernel-dim", json!(r.kernel_dim));
            put("kernel-matches", json!(r.kernel_matches));
            put("sampled-directions", json!(r.sampled));
            put("nondegenerate-directions", json!(r.nondegenerate));
            put("kernel-condition", json!(r.kernel_condition));
            put("curvature-enters-derivative", json!(r.curvature_check));
            json!({"expected_kernel": expected_kernel().iter().map(|v| qv(v)).collect::<Vec<_>>()})
        }
        "4.4" => {
            let r = sqrt_strata_report();
            let grows = r.curve_ratios.windows(2).all(|w| w[1] > w[0]);
            put("curve-ratio-grows", json!(grows));
            put(
                "curve-ratio-final",
                float(*r.curve_ratios.last().expect("nonempty")),
            );
            put(
                "axis-ratio-bounded",
                json!(r.axis_ratios.iter().all(|x| (x - 1.0).abs() <= 1e-9)),
            );
            put(
                "normals-tend-to-horizontal",
                json!(r.normal_gaps.last().is_some_and(|g| *g < 1e-2)),
            );
            put(
                "fiber-direction",
                r.fiber_direction.as_ref().map_or(Value::Null, |u| qv(u)),
            );
            put("estimate-holds", json!(r.estimate_holds));
            json!({"curve_ratios": r.curve_ratios, "axis_ratios": r.axis_ratios, "normal_gaps": r.normal_gaps})
        }
        other => {
            return Err(Error::Parse {
                location: "example id".into(),
                message: format!("unknown example {other:?}; known: {}", IDS.join(", ")),
            })
        }
    };
    Ok(json!({"id": id, "checks": Value::Object(checks), "details": details}))
}

fn matches(got: &Value, want: &Value, tol: f64) -> bool {
    match (got.as_f64(), want.as_f64()) {
        (Some(a), Some(b)) if !got.is_boolean() => close(a, b, tol),
        _ => got == want,
    }
}

/// Runs the selected gallery entries. Any deviation from the fixture gives exit code 1 with a diff.
pub fn run(flags: &Flags, tol: Option<f64>, file_filter: Option<&str>) -> Result<Outcome> {
    let tol = tol.unwrap_or(0.05);
    let sched = Schedule {
        seed: flags.seed.unwrap_or(0),
        ..Schedule::default()
    };
    let filter = flags.filter.as_deref().or(file_filter);
    let want = expected();
    let mut entries = Map::new();
    let mut all_checks = Map::new();
    let mut diff = Vec::new();
    for id in IDS
        .iter()
        .filter(|id| filter.is_none_or(|f| id.contains(f)))
    {
        let e = entry(id, &sched, flags.mutate.as_deref())?;
        let checks = e["checks"].as_object().expect("checks object");
        let fixture = want.get(*id).cloned().unwrap_or_default();
        for (k, w) in &fixture {
            match checks.get(k) {
                Some(g) if matches(g, w, tol) => {}
                Some(g) => diff.push(json!({"example": id, "check": k, "expected": w, "got": g})),
                None => {
                    diff.push(json!({"example": id, "check": k, "expected": w, "got": Value::Null}))
                }
            }
        }
        for k in checks.keys().filter(|k| !fixture.contains_key(*k)) {
            diff.push(
                json!({"example": id, "check": k, "expected": Value::Null, "got": checks[k]}),
            );
        }
        all_checks.insert((*id).to_string(), Value::Object(checks.clone()));
        entries.insert((*id).to_string(), e);
    }
    if entries.is_empty() {
        return Err(Error::pre(format!(
            "filter {:?} selects no example",
            filter.unwrap_or("")
        )));
    }
    let passed = diff.is_empty();
    let out = Outcome::ok(json!({
        "passed": passed,
        "tolerance": tol,
        "examples": Value::Object(entries),
        "checks": Value::Object(all_checks),
        "mismatches": diff,
    }));
    Ok(out.code_if(!passed, EXIT_MISMATCH))
}
