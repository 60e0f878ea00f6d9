//! Command-line front end: problem files in, structured reports out.

pub mod format;
pub mod suite;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::calculus::{self, Mode, RuleReport, Verdict};
use crate::cones::{critical_cone, ncone_graph_local_model, PolySet};
use crate::constraint::{self, SubregularityCondition};
use crate::error::{Error, Result};
use crate::geometry::*;
use crate::maps::{self, DerivativeKind, PolyMap};
use crate::verify::{self, examples, ModulusKind, PolyMapOracle, Schedule};
use format::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_MISSING_CERTIFICATE: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_PARSE: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "polycalm",
    version,
    about = "Exact polyhedral variational analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Tangent, normal and critical cones of polyhedral sets.
    Cone { op: ConeOp },
    /// Derivatives and calmness of polyhedral maps.
    Map { op: MapOp },
    /// Calculus rules for graphical derivatives and normal cones.
    Rule { op: RuleOp },
    /// Normal cone maps of constraint systems `g(x) ∈ D`.
    Constraint { op: ConstraintOp },
    /// Normal cone maps of parametric systems.
    Parametric { op: ParametricOp },
    /// Sampled moduli and the example gallery: `modulus`, `suite` or `example-<id>`.
    Verify { target: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ConeOp {
    Polar,
    Faces,
    Tangent,
    Normal,
    Dirnormal,
    Critical,
    Reduction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MapOp {
    Gder,
    Coderiv,
    Calmness,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RuleOp {
    Image,
    Chain,
    Sum,
    Product,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ConstraintOp {
    Multipliers,
    Gder,
    Coderiv,
    Nondeg,
    Subreg,
    Semismooth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ParametricOp {
    Conditions,
    Gder,
    Coderiv,
    Semismooth,
}

#[derive(clap::Args, Debug, Default, Clone)]
pub struct Flags {
    /// Problem file.
    #[arg(long = "in", global = true)]
    pub input: Option<PathBuf>,
    /// Report destination; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<RunMode>,
    /// Relative tolerance for sampled comparisons.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run only gallery entries whose id contains this string.
    #[arg(long, global = true)]
    pub filter: Option<String>,
    /// Base point (`x̄`, `ȳ` or `z`), comma-separated rationals.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub point: Option<String>,
    /// Value at the base point (`x̄ ∈ S(ȳ)`, `z̄`).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub value: Option<String>,
    /// Dual vector (`x*`, `z*`).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub xstar: Option<String>,
    /// Direction.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub dir: Option<String>,
    /// Second direction component (`v` of `(u, v)`, or `w` in the product rule).
    #[arg(long = "dir-value", global = true, allow_hyphen_values = true)]
    pub dir_value: Option<String>,
    /// Argument of a coderivative.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub dual: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub ustar: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub wstar: Option<String>,
    /// Parameter `p` of a parametric system.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub param: Option<String>,
    /// Curve parameter for `verify example-2.6`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub t: Option<f64>,
    /// Coderivative kind (regular, limiting, directional) or modulus kind
    /// (inner-calm-star, fuzzy, inner-calm, calm, inner-semicompact).
    #[arg(long, global = true)]
    pub kind: Option<String>,
    /// Inject a known fault into the gallery (`hessian-sign`).
    #[arg(long, global = true)]
    pub mutate: Option<String>,
    /// Print the computed gallery checks in fixture format.
    #[arg(long, global = true)]
    pub emit_fixture: bool,
    /// Add wall-clock timing to the report.
    #[arg(long, global = true)]
    pub timing: bool,
}

/// What a command produced: results plus the exit status they imply.
pub struct Outcome {
    pub results: Value,
    pub certificates: Value,
    pub code: i32,
}

impl Outcome {
    fn ok(results: Value) -> Self {
        Outcome {
            results,
            certificates: Value::Null,
            code: EXIT_OK,
        }
    }

    fn with_certificates(mut self, c: Value) -> Self {
        self.certificates = c;
        self
    }

    fn code_if(mut self, cond: bool, code: i32) -> Self {
        if cond && self.code == EXIT_OK {
            self.code = code;
        }
        self
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::MissingCertificate(_) => EXIT_MISSING_CERTIFICATE,
        Error::Parse { .. } | Error::Io(_) => EXIT_PARSE,
        Error::Dimension { .. } | Error::Precondition(_) | Error::Unsupported(_) => {
            EXIT_PRECONDITION
        }
    }
}

struct Ctx<'a> {
    flags: &'a Flags,
    problem: ProblemFile,
}

impl Ctx<'_> {
    fn vector(&self, name: &str) -> Result<Vec<Q>> {
        self.opt_vector(name)?.ok_or_else(|| Error::Parse {
            location: format!("--{name}"),
            message: format!("missing vector `{name}` (flag or payload.vectors.{name})"),
        })
    }

    fn opt_vector(&self, name: &str) -> Result<Option<Vec<Q>>> {
        let f = &self.flags;
        let flag = match name {
            "point" => &f.point,
            "value" => &f.value,
            "xstar" => &f.xstar,
            "dir" => &f.dir,
            "dir-value" => &f.dir_value,
            "dual" => &f.dual,
            "ustar" => &f.ustar,
            "wstar" => &f.wstar,
            "param" => &f.param,
            _ => &None,
        };
        if let Some(s) = flag {
            return parse_vector(s).map(Some).map_err(|m| Error::Parse {
                location: format!("--{name}"),
                message: m,
            });
        }
        Ok(self.problem.payload.vectors.get(name).map(|v| to_q(v)))
    }

    fn mode(&self) -> Option<RunMode> {
        self.flags.mode.or(self.problem.options.mode)
    }

    fn seed(&self) -> u64 {
        self.flags.seed.or(self.problem.options.seed).unwrap_or(0)
    }

    fn tol(&self) -> Option<f64> {
        self.flags.tol.or(self.problem.options.tolerance)
    }

    fn schedule(&self) -> Schedule {
        let mut s = Schedule {
            seed: self.seed(),
            ..Schedule::default()
        };
        if let Some(o) = &self.problem.options.schedule {
            s.t0 = o.t0.unwrap_or(s.t0);
            s.levels = o.levels.unwrap_or(s.levels);
            s.eps0 = o.eps0.unwrap_or(s.eps0);
            s.grid = o.grid.unwrap_or(s.grid);
        }
        s
    }

    fn require<T: Clone>(&self, v: &Option<T>, name: &str) -> Result<T> {
        v.clone().ok_or_else(|| Error::Parse {
            location: format!("field payload.{name}"),
            message: format!("`{name}` is required"),
        })
    }

    fn expect_kind(&self, kinds: &[Kind]) -> Result<()> {
        if kinds.contains(&self.problem.kind) {
            return Ok(());
        }
        let names: Vec<&str> = kinds.iter().map(Kind::name).collect();
        Err(Error::Parse {
            location: "field kind".into(),
            message: format!(
                "expected {}, found {}",
                names.join(" or "),
                self.problem.kind.name()
            ),
        })
    }

    /// The set operand: `set`, `polyhedron` or `cone`, in that order.
    fn set(&self) -> Result<PolySet> {
        let p = &self.problem.payload;
        if let Some(s) = &p.set {
            return s.build("payload.set");
        }
        if let Some(s) = &p.polyhedron {
            return Ok(PolySet::convex(s.build("payload.polyhedron")?));
        }
        if let Some(c) = &p.cone {
            return Ok(PolySet::convex(Polyhedron::from_cone(
                &c.build("payload.cone")?,
            )));
        }
        Err(Error::Parse {
            location: "field payload".into(),
            message: "one of `set`, `polyhedron`, `cone` is required".into(),
        })
    }

    fn polyhedron(&self) -> Result<Polyhedron> {
        let p = &self.problem.payload;
        if let Some(s) = &p.polyhedron {
            return s.build("payload.polyhedron");
        }
        if let Some(c) = &p.cone {
            return Ok(Polyhedron::from_cone(&c.build("payload.cone")?));
        }
        Err(Error::Parse {
            location: "field payload".into(),
            message: "one of `polyhedron`, `cone` is required".into(),
        })
    }

    fn map(&self, name: &str) -> Result<PolyMap> {
        let spec = match name {
            "second" => &self.problem.payload.second,
            _ => &self.problem.payload.map,
        };
        self.require(spec, name)?.build(&format!("payload.{name}"))
    }
}

fn load(flags: &Flags, default_kind: Kind) -> Result<ProblemFile> {
    match &flags.input {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            ProblemFile::parse(&text)
        }
        None => Ok(ProblemFile {
            kind: default_kind,
            payload: Payload::default(),
            options: Options::default(),
        }),
    }
}

fn point_in(set: &PolySet, x: &[Q], what: &str) -> Result<()> {
    if x.len() != set.dim() {
        return Err(Error::Dimension {
            context: "point",
            expected: set.dim(),
            found: x.len(),
        });
    }
    if !set.contains(x) {
        return Err(Error::pre(format!("{what} is not in the set")));
    }
    Ok(())
}

fn cone_command(ctx: &Ctx, op: ConeOp) -> Result<Outcome> {
    ctx.expect_kind(&[Kind::ConeOp])?;
    let out = match op {
        ConeOp::Polar => {
            let spec = ctx.require(&ctx.problem.payload.cone, "cone")?;
            let k = spec.build("payload.cone")?;
            json!({"cone": cone_json(&k), "polar": cone_json(&k.polar())})
        }
        ConeOp::Faces => {
            if let Some(spec) = &ctx.problem.payload.cone {
                let k = spec.build("payload.cone")?;
                let faces: Vec<Value> = k
                    .faces()
                    .iter()
                    .map(|f| json!({"ray_indices": f.ray_indices, "cone": cone_json(&f.cone), "witness": qv(&f.witness)}))
                    .collect();
                json!({"cone": cone_json(&k), "faces": faces})
            } else {
                let p = ctx.polyhedron()?;
                let faces: Vec<Value> = p
                    .faces()
                    .iter()
                    .map(|f| json!({"face": polyhedron_json(&f.poly), "witness": qv(&f.witness)}))
                    .collect();
                json!({"polyhedron": polyhedron_json(&p), "faces": faces})
            }
        }
        ConeOp::Tangent => {
            let (s, x) = (ctx.set()?, ctx.vector("point")?);
            point_in(&s, &x, "point")?;
            json!({"tangent_cone": union_json(&s.tangent_cone(&x))})
        }
        ConeOp::Normal => {
            let (s, x) = (ctx.set()?, ctx.vector("point")?);
            point_in(&s, &x, "point")?;
            json!({
                "regular_normal_cone": s.regular_normal_cone(&x).as_ref().map(cone_json),
                "limiting_normal_cone": union_json(&s.limiting_normal_cone(&x)),
            })
        }
        ConeOp::Dirnormal => {
            let (s, x, u) = (ctx.set()?, ctx.vector("point")?, ctx.vector("dir")?);
            point_in(&s, &x, "point")?;
            if u.len() != s.dim() {
                return Err(Error::Dimension {
                    context: "direction",
                    expected: s.dim(),
                    found: u.len(),
                });
            }
            let t = s.tangent_cone(&x);
            json!({
                "direction_in_tangent_cone": t.contains(&u),
                "directional_normal_cone": union_json(&s.directional_limiting_normal_cone(&x, &u)),
            })
        }
        ConeOp::Critical => {
            let (d, z, zs) = (
                ctx.polyhedron()?,
                ctx.vector("point")?,
                ctx.vector("xstar")?,
            );
            json!({"critical_cone": cone_json(&critical_cone(&d, &z, &zs)?)})
        }
        ConeOp::Reduction => {
            let (d, z, zs) = (
                ctx.polyhedron()?,
                ctx.vector("point")?,
                ctx.vector("xstar")?,
            );
            let m = ncone_graph_local_model(&d, &z, &zs)?;
            json!({
                "critical_cone": cone_json(&m.critical_cone),
                "model": set_json(&m.model),
                "radius": m.radius.as_ref().map(format_rat),
            })
        }
    };
    Ok(Outcome::ok(out))
}

fn map_command(ctx: &Ctx, op: MapOp) -> Result<Outcome> {
    ctx.expect_kind(&[Kind::MapOp])?;
    let s = ctx.map("map")?;
    let y = ctx.vector("point")?;
    match op {
        MapOp::Gder => {
            let x = ctx.vector("value")?;
            let d = maps::graphical_derivative(&s, &y, &x)?;
            let mut out = json!({"kind": d.kind.name(), "graph": union_json(&d.value)});
            if let Some(u) = ctx.opt_vector("dir")? {
                if u.len() != s.in_dim() {
                    return Err(Error::Dimension {
                        context: "direction",
                        expected: s.in_dim(),
                        found: u.len(),
                    });
                }
                out["image"] = set_json(&d.apply(&u));
            }
            Ok(Outcome::ok(out))
        }
        MapOp::Coderiv => {
            let x = ctx.vector("value")?;
            let kind = match ctx.flags.kind.as_deref().unwrap_or("limiting") {
                "regular" => DerivativeKind::RegularCoderivative,
                "limiting" => DerivativeKind::LimitingCoderivative,
                "directional" => DerivativeKind::DirectionalCoderivative {
                    u: ctx.vector("dir")?,
                    v: ctx.vector("dir-value")?,
                },
                other => {
                    return Err(Error::Parse {
                        location: "--kind".into(),
                        message: format!("unknown coderivative kind {other:?}"),
                    })
                }
            };
            let d = maps::coderivative(&s, &y, &x, kind)?;
            let mut out = json!({"kind": d.kind.name(), "normals": union_json(&d.value)});
            if let Some(v) = ctx.opt_vector("dual")? {
                if v.len() != s.out_dim() {
                    return Err(Error::Dimension {
                        context: "coderivative argument",
                        expected: s.out_dim(),
                        found: v.len(),
                    });
                }
                out["image"] = set_json(&d.apply(&v));
            }
            Ok(Outcome::ok(out))
        }
        MapOp::Calmness => {
            let b = maps::calmness_bound(&s, &y)?;
            let certs: Vec<Value> = b
                .certificates
                .iter()
                .map(|c| json!({"component": c.component, "kappa": format_rat(&c.kappa), "rows": c.rows}))
                .collect();
            let mut out = json!({"kappa": format_rat(&b.kappa), "kappa_f64": to_f64(&b.kappa)});
            if ctx.mode() == Some(RunMode::Numeric) {
                let sched = polymap_schedule(ctx, &s, &y);
                let o = PolyMapOracle::new(&s);
                let yf = vec_to_f64(&y);
                let dirs = verify::sphere_directions(s.in_dim(), 8, sched.seed);
                let mut sampled = Vec::new();
                for kind in [ModulusKind::Calm, ModulusKind::InnerCalmStar] {
                    sampled.extend(
                        verify::estimate_modulus(&o, &yf, &kind, &dirs, &sched)
                            .iter()
                            .map(estimate_json),
                    );
                }
                let worst = sampled
                    .iter()
                    .filter_map(|e| e["estimate"].as_f64())
                    .fold(0.0, f64::max);
                out["sampled"] = Value::Array(sampled);
                out["sampled_max"] = float(worst);
                out["within_bound"] = json!(worst <= to_f64(&b.kappa) * (1.0 + 1e-9));
                out["schedule"] = schedule_json(&sched);
            }
            Ok(Outcome::ok(out).with_certificates(json!({"hoffman": certs})))
        }
    }
}

/// Default schedule for a polyhedral map: the first radius stays inside the conic neighbourhood of `ȳ`.
fn polymap_schedule(ctx: &Ctx, s: &PolyMap, y: &[Q]) -> Schedule {
    let mut sched = ctx.schedule();
    let has_t0 = ctx
        .problem
        .options
        .schedule
        .as_ref()
        .is_some_and(|o| o.t0.is_some());
    if !has_t0 {
        if let Some(r) = s.domain().local_conic_radius(y) {
            sched.t0 = sched.t0.min(to_f64(&r) / 2.0);
        }
    }
    sched
}

fn rule_outcome(ctx: &Ctx, reports: Vec<(&str, RuleReport)>) -> Result<Outcome> {
    if ctx.mode() == Some(RunMode::Exact) && reports.iter().any(|(_, r)| r.mode == Mode::Numeric) {
        return Err(Error::pre(
            "exact mode requested but the rule is only checkable by sampling here",
        ));
    }
    let estimate_only = reports.iter().any(|(_, r)| {
        r.mode == Mode::EstimateOnly || r.assumptions.iter().any(|a| a.verdict != Verdict::Holds)
    });
    let mut out = Map::new();
    for (k, r) in &reports {
        out.insert((*k).to_string(), rule_json(r));
    }
    Ok(Outcome::ok(Value::Object(out)).code_if(estimate_only, EXIT_MISSING_CERTIFICATE))
}

fn rule_command(ctx: &Ctx, op: RuleOp) -> Result<Outcome> {
    ctx.expect_kind(&[Kind::Rule])?;
    let payload = &ctx.problem.payload;
    match op {
        RuleOp::Image => {
            let c = ctx.set()?;
            let phi = ctx.require(&payload.phi, "phi")?.build("payload.phi")?;
            let y = ctx.vector("point")?;
            let cands: Vec<Vec<Q>> = payload.candidates.iter().map(|v| to_q(v)).collect();
            let mut reps = vec![(
                "tangent",
                calculus::image_tangent_rule(&c, &phi, &y, &cands)?,
            )];
            if let Some(v) = ctx.opt_vector("dir")? {
                reps.push((
                    "directional_normal",
                    calculus::image_directional_normal_rule(&c, &phi, &y, &v)?,
                ));
            }
            rule_outcome(ctx, reps)
        }
        RuleOp::Chain | RuleOp::Sum => {
            let (s1, s2) = (ctx.map("map")?, ctx.map("second")?);
            let (x, z) = (ctx.vector("point")?, ctx.vector("value")?);
            let r = if op == RuleOp::Chain {
                calculus::chain_rule_gder(&s1, &s2, &x, &z)?
            } else {
                calculus::sum_rule_gder(&s1, &s2, &x, &z)?
            };
            rule_outcome(ctx, vec![("graphical_derivative", r)])
        }
        RuleOp::Product => {
            let s1 = ctx
                .require(&payload.matrix, "matrix")?
                .build("payload.matrix")?;
            let s2 = ctx.map("map")?;
            let (x, z, u) = (
                ctx.vector("point")?,
                ctx.vector("value")?,
                ctx.vector("dir")?,
            );
            let mut reps = vec![(
                "graphical_derivative",
                calculus::product_rule_gder(&s1, &s2, &x, &z, &u)?,
            )];
            if let (Some(w), Some(zs)) = (ctx.opt_vector("dir-value")?, ctx.opt_vector("dual")?) {
                reps.push((
                    "coderivative",
                    calculus::product_rule_coderivative(&s1, &s2, &x, &z, &u, &w, &zs)?,
                ));
            }
            rule_outcome(ctx, reps)
        }
    }
}

fn gder_json(r: &constraint::GderResult) -> Value {
    json!({
        "value": set_json(&r.value),
        "pieces": r.pieces.iter().map(|p| json!({
            "lambda": qv(&p.lambda),
            "critical_cone": cone_json(&p.critical_cone),
            "cone": p.cone.as_ref().map(cone_json),
            "forms_agree": p.forms_agree,
        })).collect::<Vec<_>>(),
        "multipliers": multipliers_json(&r.multipliers),
    })
}

fn multipliers_json(m: &constraint::MultiplierSet) -> Value {
    json!({
        "set": polyhedron_json(&m.set),
        "cells": m.cells.iter().map(|c| json!({
            "witness": qv(&c.witness),
            "closure": polyhedron_json(&c.closure),
            "critical_cone": cone_json(&c.critical_cone),
        })).collect::<Vec<_>>(),
    })
}

fn nondeg_json(v: &constraint::NondegeneracyVerdict) -> Value {
    json!({"holds": v.holds, "vacuous": v.vacuous, "span_dim": v.span_dim, "kernel_basis": qm(&v.kernel_basis)})
}

fn subreg_json(r: &constraint::SubregularityReport) -> Value {
    let checks: Map<String, Value> = r
        .checks
        .iter()
        .map(|(c, ok)| (c.name().to_string(), json!(ok)))
        .collect();
    json!({"checks": checks, "certified_by": r.certified_by.map(|c| c.name())})
}

fn semismooth_json(r: &constraint::SemismoothnessReport) -> Value {
    json!({
        "holds": r.holds(),
        "strata": r.strata,
        "checks": r.checks,
        "violations": r.violations.iter().map(|(l, w, z)| json!({"lambda": qv(l), "wstar": qv(w), "zeta": qv(z)})).collect::<Vec<_>>(),
    })
}

fn constraint_command(ctx: &Ctx, op: ConstraintOp) -> Result<Outcome> {
    ctx.expect_kind(&[Kind::Constraint])?;
    let sys = ctx
        .require(&ctx.problem.payload.system, "system")?
        .build("payload.system")?;
    let x = ctx.vector("point")?;
    match op {
        ConstraintOp::Multipliers => {
            let m = constraint::multiplier_set(&sys, &x, &ctx.vector("xstar")?)?;
            Ok(Outcome::ok(
                json!({"empty": m.is_empty(), "multipliers": multipliers_json(&m)}),
            ))
        }
        ConstraintOp::Gder => {
            let u = ctx.vector("dir")?;
            let (r, cert) = constraint::gder_normal_cone_map(&sys, &x, &ctx.vector("xstar")?, &u)?;
            let nondeg = cert
                .checks
                .iter()
                .any(|(c, ok)| *c == SubregularityCondition::DirectionalNondegeneracy && *ok);
            let out = json!({"graphical_derivative": gder_json(&r), "forms_agree": r.forms_agree(), "nondegeneracy": nondeg});
            Ok(Outcome::ok(out)
                .with_certificates(subreg_json(&cert))
                .code_if(cert.certified_by.is_none(), EXIT_MISSING_CERTIFICATE))
        }
        ConstraintOp::Coderiv => {
            let est = constraint::dir_coderivative_estimate(
                &sys,
                &x,
                &ctx.vector("xstar")?,
                &ctx.vector("dir")?,
                &ctx.vector("ustar")?,
                &ctx.vector("wstar")?,
            )?;
            Ok(Outcome::ok(json!({"estimate": set_json(&est)})))
        }
        ConstraintOp::Nondeg => {
            let u = ctx.opt_vector("dir")?.unwrap_or_else(|| zeros(sys.n()));
            let v = constraint::check_directional_nondegeneracy(&sys, &x, &u)?;
            Ok(Outcome::ok(json!({"nondegeneracy": nondeg_json(&v)})))
        }
        ConstraintOp::Subreg => {
            let u = ctx.opt_vector("dir")?;
            let r = constraint::subregularity_certificates(&sys, &x, u.as_deref())?;
            Ok(Outcome::ok(json!({"certified": r.certified_by.is_some()}))
                .with_certificates(subreg_json(&r))
                .code_if(r.certified_by.is_none(), EXIT_MISSING_CERTIFICATE))
        }
        ConstraintOp::Semismooth => {
            let r = constraint::semismoothness_check(
                &sys,
                &x,
                &ctx.vector("xstar")?,
                &ctx.vector("dir")?,
                &ctx.vector("ustar")?,
            )?;
            Ok(Outcome::ok(json!({"semismoothness": semismooth_json(&r)})))
        }
    }
}

fn parametric_command(ctx: &Ctx, op: ParametricOp) -> Result<Outcome> {
    ctx.expect_kind(&[Kind::Parametric])?;
    let sys = ctx
        .require(&ctx.problem.payload.system, "system")?
        .build_parametric("payload.system")?;
    let p = ctx.opt_vector("param")?.unwrap_or_else(|| zeros(sys.l));
    let x = ctx.vector("point")?;
    let v = ctx.vector("dir")?;
    let conditions_json = |c: &constraint::ParametricConditions| {
        json!({
            "with_jacobian": nondeg_json(&c.with_jacobian),
            "with_beta": nondeg_json(&c.with_beta),
            "x_independent": c.x_independent,
            "affine": c.affine,
            "standing_assumption": c.standing_assumption(),
        })
    };
    match op {
        ParametricOp::Conditions => {
            let c = constraint::parametric_conditions(&sys, &p, &x, &v)?;
            Ok(Outcome::ok(json!({"conditions": conditions_json(&c)}))
                .code_if(!c.standing_assumption(), EXIT_MISSING_CERTIFICATE))
        }
        ParametricOp::Gder => {
            let (r, c) = constraint::parametric_gder(&sys, &p, &x, &ctx.vector("xstar")?, &v)?;
            Ok(Outcome::ok(json!({"graphical_derivative": gder_json(&r)}))
                .with_certificates(conditions_json(&c))
                .code_if(!c.standing_assumption(), EXIT_MISSING_CERTIFICATE))
        }
        ParametricOp::Coderiv => {
            let est = constraint::parametric_coderivative_estimate(
                &sys,
                &p,
                &x,
                &ctx.vector("xstar")?,
                &v,
                &ctx.vector("ustar")?,
                &ctx.vector("wstar")?,
            )?;
            Ok(Outcome::ok(json!({"estimate": set_json(&est)})))
        }
        ParametricOp::Semismooth => {
            let r = constraint::parametric_semismoothness_check(
                &sys,
                &p,
                &x,
                &ctx.vector("xstar")?,
                &v,
                &ctx.vector("ustar")?,
            )?;
            Ok(Outcome::ok(json!({"semismoothness": semismooth_json(&r)})))
        }
    }
}

fn modulus_kind(ctx: &Ctx) -> Result<ModulusKind> {
    Ok(
        match ctx.flags.kind.as_deref().unwrap_or("inner-calm-star") {
            "inner-calm-star" => ModulusKind::InnerCalmStar,
            "fuzzy" => ModulusKind::FuzzyInnerCalmStar,
            "inner-calm" => ModulusKind::InnerCalm(vec_to_f64(&ctx.vector("value")?)),
            "calm" => ModulusKind::Calm,
            "inner-semicompact" => ModulusKind::InnerSemicompact,
            other => {
                return Err(Error::Parse {
                    location: "--kind".into(),
                    message: format!("unknown modulus kind {other:?}"),
                })
            }
        },
    )
}

fn verify_command(ctx: &Ctx, target: &str) -> Result<Outcome> {
    if ctx.mode() == Some(RunMode::Exact) && target != "example-3.5" && target != "suite" {
        return Err(Error::pre("sampled moduli require --mode numeric"));
    }
    let sched = ctx.schedule();
    match target {
        "modulus" => {
            ctx.expect_kind(&[Kind::MapOp])?;
            let s = ctx.map("map")?;
            let y = ctx.vector("point")?;
            if y.len() != s.in_dim() {
                return Err(Error::Dimension {
                    context: "base point",
                    expected: s.in_dim(),
                    found: y.len(),
                });
            }
            if !s.domain().contains(&y) {
                return Err(Error::pre("base point is not in the domain"));
            }
            let kind = modulus_kind(ctx)?;
            let sched = polymap_schedule(ctx, &s, &y);
            let dirs = match ctx.opt_vector("dir")? {
                Some(d) => vec![vec_to_f64(&d)],
                None => verify::sphere_directions(s.in_dim(), 8, sched.seed),
            };
            let est = verify::estimate_modulus(
                &PolyMapOracle::new(&s),
                &vec_to_f64(&y),
                &kind,
                &dirs,
                &sched,
            );
            Ok(Outcome::ok(json!({
                "estimates": est.iter().map(estimate_json).collect::<Vec<_>>(),
                "schedule": schedule_json(&sched),
            })))
        }
        "example-2.6" => {
            let ts: Vec<f64> = match ctx.flags.t {
                Some(t) => vec![t],
                None => examples::CURVE_ANGLES
                    .iter()
                    .copied()
                    .chain([std::f64::consts::TAU])
                    .collect(),
            };
            let tol = ctx.tol().unwrap_or(0.05);
            let rows: Vec<Value> = ts
                .iter()
                .map(|&t| {
                    let m = examples::curve_modulus_estimate(t, &sched);
                    json!({
                        "t": t,
                        "expected": m.expected,
                        "fuzzy": estimate_json(&m.fuzzy),
                        "non_fuzzy": estimate_json(&m.strict),
                        "kappa_hat": float(m.fuzzy.estimate),
                        "within_tolerance": suite::close(m.fuzzy.estimate, m.expected, tol),
                    })
                })
                .collect();
            Ok(Outcome::ok(
                json!({"moduli": rows, "tolerance": tol, "schedule": schedule_json(&sched)}),
            ))
        }
        "suite" => suite::run(ctx.flags, ctx.tol(), ctx.problem.payload.filter.as_deref()),
        t if t.starts_with("example-") => {
            let id = &t["example-".len()..];
            let entry = suite::entry(id, &sched, ctx.flags.mutate.as_deref())?;
            Ok(Outcome::ok(entry))
        }
        other => Err(Error::Parse {
            location: "verify target".into(),
            message: format!("unknown target {other:?}"),
        }),
    }
}

impl Cli {
    /// Parses an argument list whose first item is the program name; the error is clap's message.
    pub fn parse_args<I, T>(args: I) -> std::result::Result<Cli, String>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        Cli::try_parse_from(args).map_err(|e| e.to_string())
    }
}

/// Runs one parsed command and returns the exit code and the report text.
pub fn execute(cli: &Cli) -> (i32, String) {
    let start = Instant::now();
    let (name, default_kind) = match &cli.command {
        Command::Cone { op } => (
            format!("cone {}", op.to_possible_value().expect("named").get_name()),
            Kind::ConeOp,
        ),
        Command::Map { op } => (
            format!("map {}", op.to_possible_value().expect("named").get_name()),
            Kind::MapOp,
        ),
        Command::Rule { op } => (
            format!("rule {}", op.to_possible_value().expect("named").get_name()),
            Kind::Rule,
        ),
        Command::Constraint { op } => (
            format!(
                "constraint {}",
                op.to_possible_value().expect("named").get_name()
            ),
            Kind::Constraint,
        ),
        Command::Parametric { op } => (
            format!(
                "parametric {}",
                op.to_possible_value().expect("named").get_name()
            ),
            Kind::Parametric,
        ),
        Command::Verify { target } => (format!("verify {target}"), Kind::VerifySuite),
    };
    let result = load(&cli.flags, default_kind).and_then(|problem| {
        let ctx = Ctx {
            flags: &cli.flags,
            problem,
        };
        let out = match &cli.command {
            Command::Cone { op } => cone_command(&ctx, *op),
            Command::Map { op } => map_command(&ctx, *op),
            Command::Rule { op } => rule_command(&ctx, *op),
            Command::Constraint { op } => constraint_command(&ctx, *op),
            Command::Parametric { op } => parametric_command(&ctx, *op),
            Command::Verify { target } => verify_command(&ctx, target),
        };
        Ok((ctx.problem, out?))
    });
    let mut report = Map::new();
    report.insert("tool".into(), json!("polycalm"));
    report.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    report.insert("command".into(), json!(name));
    let code = match result {
        Ok((problem, out)) => {
            report.insert("input".into(), input_echo(&problem, &cli.flags));
            report.insert("results".into(), out.results);
            if !out.certificates.is_null() {
                report.insert("certificates".into(), out.certificates);
            }
            out.code
        }
        Err(e) => {
            let code = exit_code(&e);
            report.insert(
                "error".into(),
                json!({"message": e.to_string(), "kind": error_kind(&e)}),
            );
            code
        }
    };
    report.insert("exit_code".into(), json!(code));
    if cli.flags.timing {
        report.insert(
            "timing_ms".into(),
            json!(start.elapsed().as_secs_f64() * 1e3),
        );
    }
    let text = if cli.flags.emit_fixture
        && report
            .get("results")
            .is_some_and(|r| r["checks"].is_object())
    {
        serde_json::to_string_pretty(&report["results"]["checks"]).expect("json")
    } else {
        serde_json::to_string_pretty(&Value::Object(report)).expect("json")
    };
    (code, text + "\n")
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Dimension { .. } => "dimension",
        Error::Precondition(_) => "precondition",
        Error::MissingCertificate(_) => "missing-certificate",
        Error::Parse { .. } => "parse",
        Error::Unsupported(_) => "unsupported",
        Error::Io(_) => "io",
    }
}

fn input_echo(problem: &ProblemFile, flags: &Flags) -> Value {
    let mut v = serde_json::to_value(problem).expect("problem serializes");
    let mut fl = Map::new();
    let named = [
        ("point", &flags.point),
        ("value", &flags.value),
        ("xstar", &flags.xstar),
        ("dir", &flags.dir),
        ("dir-value", &flags.dir_value),
        ("dual", &flags.dual),
        ("ustar", &flags.ustar),
        ("wstar", &flags.wstar),
        ("param", &flags.param),
        ("kind", &flags.kind),
        ("filter", &flags.filter),
        ("mutate", &flags.mutate),
    ];
    for (k, f) in named {
        if let Some(s) = f {
            fl.insert(k.into(), json!(s));
        }
    }
    if let Some(m) = flags.mode {
        fl.insert("mode".into(), json!(m));
    }
    if let Some(t) = flags.tol {
        fl.insert("tol".into(), json!(t));
    }
    if let Some(s) = flags.seed {
        fl.insert("seed".into(), json!(s));
    }
    if let Some(t) = flags.t {
        fl.insert("t".into(), json!(t));
    }
    v["flags"] = Value::Object(fl);
    v
}

/// Parses `args`, runs the command, writes the report and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (code, text) = execute(&cli);
    match &cli.flags.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("cannot write {}: {e}", path.display());
                return EXIT_PARSE;
            }
        }
        None => print!("{text}"),
    }
    if code != EXIT_OK && code != EXIT_MISMATCH {
        if let Some(msg) = serde_json::from_str::<Value>(&text)
            .ok()
            .and_then(|v| v["error"]["message"].as_str().map(String::from))
        {
            eprintln!("polycalm: {msg}");
        }
    }
    code
}
