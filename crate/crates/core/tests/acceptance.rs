//! Acceptance gate: one line per criterion, nonzero exit if any fails.

mod common;

use std::f64::consts::{PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use proptest::strategy::Strategy;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use common::*;
use polycalm::calculus::{chain_rule_gder, product_rule_gder, sum_rule_gder, Relation, Verdict};
use polycalm::cones::{ncone_graph_local_model, normal_cone_graph};
use polycalm::constraint::{
    check_directional_nondegeneracy, gder_normal_cone_map, parametric_gder, semismoothness_check,
};
use polycalm::geometry::*;
use polycalm::maps::{calmness_bound, graphical_derivative, PolyMap};
use polycalm::verify::examples::{
    curve_modulus_estimate, directional_nondegeneracy_system, nondegeneracy_report,
};
use polycalm::verify::{
    estimate_modulus, sphere_directions, ModulusKind, PolyMapOracle, Schedule, DIVERGENCE,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Graphical derivative of the normal cone map against the tangent cone of the explicit graph.
fn affine_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut equal = 0;
    let total = 20;
    for seed in 0..total {
        let mut r = rng(1000 + seed);
        let inst = random_affine_instance(&mut r);
        let n = inst.x.len();
        let (res, _) =
            gder_normal_cone_map(&inst.sys, &inst.x, &inst.xstar, &inst.u).expect("valid instance");
        let graph = PolyMap::new(n, n, normal_cone_graph(&inst.gamma)).expect("dims");
        let direct = graphical_derivative(&graph, &inst.x, &inst.xstar)
            .expect("on graph")
            .apply(&inst.u);
        if res.value.set_eq(&direct) {
            equal += 1;
        } else {
            eprintln!("  criterion 1 mismatch at seed {}", 1000 + seed);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        equal == total && elapsed < Duration::from_secs(300),
        format!(
            "{equal}/{total} exact set equality in {:.1}s (limit 300s)",
            elapsed.as_secs_f64()
        ),
    )
}

/// The critical-cone model against the shifted graph, both cut to a box inside the radius.
fn reduction_lemma() -> Outcome {
    let mut ok = 0;
    let total = 20;
    for seed in 0..total {
        let mut r = rng(2000 + seed);
        let s = 1 + (seed as usize % 4);
        let d = random_polyhedron(&mut r, s, s + 2, None);
        let z = random_face_point(&d, &mut r);
        let zstar = random_in_cone(&d.normal_cone(&z).expect("z in D"), &mut r);
        let model = ncone_graph_local_model(&d, &z, &zstar).expect("valid pair");
        let rho = model.radius.clone().unwrap_or_else(|| q(1));
        let h = rho / q(4 * s as i64);
        let cut = box_around(&zeros(2 * s), &h);
        let shifted = translate(&normal_cone_graph(&d), &neg(&concat(&z, &zstar)));
        let a = shifted.intersect_poly(&cut).expect("dims");
        let b = model.model.intersect_poly(&cut).expect("dims");
        if a.is_subset_of(&b) && b.is_subset_of(&a) {
            ok += 1;
        } else {
            eprintln!("  criterion 2 mismatch at seed {}", 2000 + seed);
        }
    }
    outcome(
        ok == total,
        format!("{ok}/{total} truncated sets mutually included"),
    )
}

fn nondegeneracy_example() -> Outcome {
    let r = nondegeneracy_report(&directional_nondegeneracy_system(), 50, 0).expect("report");
    let pass = r.degenerate_at_zero
        && r.kernel_dim == 2
        && r.kernel_matches
        && r.sampled == 50
        && r.nondegenerate == 50
        && r.kernel_condition;
    outcome(
        pass,
        format!(
            "u=0 degenerate={} kernel dim {} matches={}; {}/{} sampled u nondegenerate; kernel condition={}",
            r.degenerate_at_zero, r.kernel_dim, r.kernel_matches, r.nondegenerate, r.sampled, r.kernel_condition
        ),
    )
}

fn curve_modulus() -> Outcome {
    let sched = Schedule::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for t in [PI / 2.0, PI, 3.0 * PI / 2.0] {
        let m = curve_modulus_estimate(t, &sched);
        let rel = (m.fuzzy.estimate - m.expected).abs() / m.expected;
        pass &= rel <= 0.05;
        parts.push(format!("{:.4} vs {:.4}", m.fuzzy.estimate, m.expected));
    }
    let refined: Vec<f64> = [10u32, 15, 20]
        .iter()
        .map(|&levels| {
            curve_modulus_estimate(
                TAU,
                &Schedule {
                    levels,
                    ..sched.clone()
                },
            )
            .strict
            .estimate
        })
        .collect();
    let at_axis = curve_modulus_estimate(TAU, &sched);
    pass &= at_axis.fuzzy.estimate == 0.0;
    pass &= refined.windows(2).all(|w| w[1] > w[0]) && at_axis.strict.estimate > DIVERGENCE;
    parts.push(format!(
        "at (1,0): fuzzy {} non-fuzzy {:.3e} (levels 10/15/20: {:.2e}/{:.2e}/{:.2e})",
        at_axis.fuzzy.estimate, at_axis.strict.estimate, refined[0], refined[1], refined[2]
    ));
    outcome(pass, parts.join("; "))
}

/// Every sampled calmness and inner-calmness* ratio stays below the certified constant.
fn polyhedral_calmness() -> Outcome {
    let mut violations = 0;
    let mut estimates = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        let mut r = rng(5000 + seed);
        let m = 1 + (seed as usize % 2);
        let n = 1 + (seed as usize / 2 % 2);
        let s = random_polymap(&mut r, m, n, None);
        let oracle = PolyMapOracle::new(&s);
        for y in domain_points(&s, &mut r, 10) {
            let kappa = to_f64(&calmness_bound(&s, &y).expect("y in domain").kappa);
            let mut sched = Schedule {
                levels: 8,
                grid: 2,
                seed,
                ..Schedule::default()
            };
            if let Some(rho) = s.domain().local_conic_radius(&y) {
                sched.t0 = sched.t0.min(to_f64(&rho) / 2.0);
            }
            let dirs = sphere_directions(m, 4, seed);
            let yf = vec_to_f64(&y);
            for kind in [ModulusKind::Calm, ModulusKind::InnerCalmStar] {
                for e in estimate_modulus(&oracle, &yf, &kind, &dirs, &sched) {
                    if e.sequences == 0 {
                        continue;
                    }
                    estimates += 1;
                    if kappa > 0.0 {
                        worst = worst.max(e.estimate / kappa);
                    }
                    if e.estimate > kappa * (1.0 + 1e-9) + 1e-12 {
                        violations += 1;
                        eprintln!(
                            "  criterion 5 violation: seed {} y {:?} {} {} > {}",
                            5000 + seed,
                            yf,
                            e.kind.name(),
                            e.estimate,
                            kappa
                        );
                    }
                }
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations over {estimates} sampled moduli at 500 domain points (max ratio/κ {worst:.3})"))
}

/// Inclusion direction and equality of the chain, sum and product rules on polyhedral data.
fn calculus_rules() -> Outcome {
    let mut inclusion_ok = 0;
    let mut certified = 0;
    let mut equal_when_certified = 0;
    let kinds = ["chain", "sum", "product"];
    for seed in 0..50u64 {
        let mut r = rng(6000 + seed);
        let inst = random_rule_instance(&mut r, kinds[seed as usize % 3]);
        let rep = match inst.kind {
            "chain" => chain_rule_gder(inst.s1.as_ref().unwrap(), &inst.s2, &inst.xbar, &inst.zbar),
            "sum" => sum_rule_gder(inst.s1.as_ref().unwrap(), &inst.s2, &inst.xbar, &inst.zbar),
            _ => product_rule_gder(
                inst.m1.as_ref().unwrap(),
                &inst.s2,
                &inst.xbar,
                &inst.zbar,
                &inst.u,
            ),
        }
        .expect("valid instance");
        let rel = rep.relation.expect("exact on polyhedral data");
        if rel.lhs_in_rhs() && rep.guarantee_respected() {
            inclusion_ok += 1;
        } else {
            eprintln!(
                "  criterion 6 inclusion failure at seed {} ({})",
                6000 + seed,
                inst.kind
            );
        }
        if rep.assumptions.iter().all(|a| a.verdict == Verdict::Holds) {
            certified += 1;
            if rel == Relation::Equal {
                equal_when_certified += 1;
            } else {
                eprintln!(
                    "  criterion 6 strict relation at seed {} ({}): {}",
                    6000 + seed,
                    inst.kind,
                    rel.name()
                );
            }
        }
    }
    outcome(
        inclusion_ok == 50 && equal_when_certified == certified && certified == 50,
        format!("inclusion {inclusion_ok}/50; certified {certified}/50; equal when certified {equal_when_certified}/{certified}"),
    )
}

/// Exact bilinear identity on every stratum of the directional coderivative estimate.
fn semismoothness() -> Outcome {
    let mut systems = 0;
    let mut strata = 0;
    let mut checks = 0;
    let mut violations = 0;
    let mut seed = 7000u64;
    while systems < 20 && seed < 9000 {
        let mut r = rng(seed);
        seed += 1;
        let inst = random_affine_instance(&mut r);
        if !check_directional_nondegeneracy(&inst.sys, &inst.x, &inst.u)
            .expect("valid")
            .holds
        {
            continue;
        }
        let (g, _) = gder_normal_cone_map(&inst.sys, &inst.x, &inst.xstar, &inst.u).expect("valid");
        let Some(ustar) = g.value.components().first().and_then(|c| c.relint_point()) else {
            continue;
        };
        let rep = semismoothness_check(&inst.sys, &inst.x, &inst.xstar, &inst.u, &ustar)
            .expect("hypotheses hold");
        systems += 1;
        strata += rep.strata;
        checks += rep.checks;
        violations += rep.violations.len();
    }
    outcome(
        systems == 20 && violations == 0 && strata > 0,
        format!("{systems} systems, {strata} strata, {checks} generator checks, {violations} violations"),
    )
}

fn parametric_consistency() -> Outcome {
    let mut equal = 0;
    for seed in 0..20u64 {
        let mut r = rng(8000 + seed);
        let inst = random_parametric_instance(&mut r);
        let l = inst.p.len();
        let (pg, _) =
            parametric_gder(&inst.psys, &inst.p, &inst.x, &inst.xstar, &inst.v).expect("valid");
        let (g, _) =
            gder_normal_cone_map(&inst.plain, &inst.x, &inst.xstar, &inst.v[l..]).expect("valid");
        if pg.value.set_eq(&g.value) {
            equal += 1;
        } else {
            eprintln!("  criterion 8 mismatch at seed {}", 8000 + seed);
        }
    }
    outcome(equal == 20, format!("{equal}/20 exact coincidence"))
}

fn run_property<S: Strategy>(
    name: &str,
    strategy: S,
    prop: impl Fn(S::Value) -> bool,
) -> (String, bool) {
    let mut runner = TestRunner::new(Config {
        cases: 200,
        failure_persistence: None,
        ..Config::default()
    });
    let res = runner.run(&strategy, |v| {
        if prop(v) {
            Ok(())
        } else {
            Err(TestCaseError::fail(name.to_string()))
        }
    });
    (name.to_string(), res.is_ok())
}

fn invariant_suites() -> Outcome {
    use common::invariants::*;
    use common::strategies;
    let results = [
        run_property("polar involution", strategies::cone(4, 5), |k| {
            polar_involution(&k)
        }),
        run_property("DD round-trip", strategies::cone(4, 6), |k| {
            dd_round_trip(&k)
        }),
        run_property("face intersection closure", strategies::cone(3, 5), |k| {
            face_intersections_closed(&k)
        }),
        run_property(
            "tangent sampling agreement",
            strategies::polyhedron_with_point(3, 4),
            |(p, x)| tangent_sampling_agrees(&p, &x),
        ),
    ];
    let pass = results.iter().all(|(_, ok)| *ok);
    let parts: Vec<String> = results
        .iter()
        .map(|(n, ok)| format!("{n} {}", if *ok { "ok" } else { "FAILED" }))
        .collect();
    outcome(pass, format!("200 cases each: {}", parts.join(", ")))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("affine-case oracle equivalence", affine_oracle_equivalence),
        ("reduction lemma local model", reduction_lemma),
        ("directional nondegeneracy example", nondegeneracy_example),
        ("curve-cone modulus", curve_modulus),
        ("two-sided calmness of polyhedral maps", polyhedral_calmness),
        ("calculus-rule inclusions", calculus_rules),
        ("semismoothness* identity", semismoothness),
        ("parametric consistency", parametric_consistency),
        ("invariant suites", invariant_suites),
    ];
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let start = Instant::now();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !res.pass {
            failed += 1;
        }
        println!(
            "[{}] {}. {} :: {} ({:.1}s)",
            if res.pass { "PASS" } else { "FAIL" },
            i + 1,
            name,
            res.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.1}s",
        ran - failed,
        ran,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
