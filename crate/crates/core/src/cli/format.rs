//! Problem files and reports.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

use crate::calculus::{MatrixMap, RuleReport};
use crate::cones::{ConeUnion, PolySet};
use crate::constraint::{ConstraintSystem, ParametricSystem, Polynomial, PolynomialMap};
use crate::error::{Error, Result};
use crate::geometry::*;
use crate::maps::PolyMap;
use crate::verify::{ModulusEstimate, Schedule};

/// An exact rational written as `"p/q"` or `"p"`, with `q > 0` and `gcd(p, q) = 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rat(pub Q);

pub fn parse_rat(s: &str) -> std::result::Result<Q, String> {
    let s = s.trim();
    let (p, d) = match s.split_once('/') {
        Some((p, d)) => (p.trim(), Some(d.trim())),
        None => (s, None),
    };
    let p: BigInt = p
        .parse()
        .map_err(|_| format!("invalid numerator in {s:?}"))?;
    let Some(d) = d else {
        return Ok(Q::from_integer(p));
    };
    if d.starts_with(['+', '-']) {
        return Err(format!(
            "denominator must be an unsigned positive integer in {s:?}"
        ));
    }
    let d: BigInt = d
        .parse()
        .map_err(|_| format!("invalid denominator in {s:?}"))?;
    if !d.is_positive() {
        return Err(format!("denominator must be positive in {s:?}"));
    }
    if !p.gcd(&d).is_one() {
        return Err(format!("{s:?} is not in lowest terms"));
    }
    Ok(Q::new_raw(p, d))
}

pub fn format_rat(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Comma-separated rationals, as given on the command line.
pub fn parse_vector(s: &str) -> std::result::Result<Vec<Q>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_rat).collect()
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rat(&self.0))
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Rat;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a rational \"p/q\" or an integer")
            }
            fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<Rat, E> {
                parse_rat(s).map(Rat).map_err(E::custom)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Rat, E> {
                Ok(Rat(q(v)))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Rat, E> {
                Ok(Rat(Q::from_integer(BigInt::from(v))))
            }
        }
        d.deserialize_any(V)
    }
}

pub type RVec = Vec<Rat>;

pub fn to_q(v: &[Rat]) -> Vec<Q> {
    v.iter().map(|r| r.0.clone()).collect()
}

pub fn to_rat(v: &[Q]) -> RVec {
    v.iter().cloned().map(Rat).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    ConeOp,
    MapOp,
    Rule,
    Constraint,
    Parametric,
    VerifySuite,
}

impl Kind {
    pub fn name(&self) -> &'static str {
        match self {
            Kind::ConeOp => "cone-op",
            Kind::MapOp => "map-op",
            Kind::Rule => "rule",
            Kind::Constraint => "constraint",
            Kind::Parametric => "parametric",
            Kind::VerifySuite => "verify-suite",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    Exact,
    Numeric,
}

/// A cone `{x : A x ≤ 0, E x = 0}` or `cone(rays) + span(lineality)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeSpec {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ineq: Vec<RVec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eq: Vec<RVec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rays: Option<Vec<RVec>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lineality: Vec<RVec>,
}

/// A row `⟨a, x⟩ ≤ b` or `⟨a, x⟩ = b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Row {
    pub a: RVec,
    pub b: Rat,
}

/// A polyhedron given by rows, or by points, rays and lineality when `points` is present.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyhedronSpec {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ineq: Vec<Row>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eq: Vec<Row>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<RVec>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rays: Vec<RVec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lineality: Vec<RVec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSpec {
    pub dim: usize,
    pub components: Vec<PolyhedronSpec>,
}

/// A polyhedral map `Q^in_dim ⇉ Q^out_dim` given by the components of its graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub components: Vec<PolyhedronSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coefficient: Rat,
    pub exponent: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyMapSpec {
    pub nvars: usize,
    pub components: Vec<Vec<Term>>,
}

/// Matrix-valued polynomial map, entries row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub rows: usize,
    pub cols: usize,
    pub entries: PolyMapSpec,
}

/// `g(x) ∈ D`; parametric systems set `params` and take variables `(p, x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<usize>,
    pub n: usize,
    pub g: PolyMapSpec,
    pub d: PolyhedronSpec,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<RunMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSpec>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Payload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone: Option<ConeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polyhedron: Option<PolyhedronSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<SetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapSpec>,
    /// Second operand of the chain and sum rules (`S₂`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second: Option<MapSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<PolyMapSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSpec>,
    /// Named points and directions; command-line flags of the same name override them.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub vectors: BTreeMap<String, RVec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<RVec>,
    /// Gallery filter for suite files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub kind: Kind,
    #[serde(default)]
    pub payload: Payload,
    #[serde(default)]
    pub options: Options,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Parse {
                location: format!(
                    "line {} column {}, field {}",
                    inner.line(),
                    inner.column(),
                    path
                ),
                message: inner.to_string(),
            }
        })
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files serialize")
    }
}

fn field(path: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Dimension { .. } | Error::Precondition(_) => Error::Parse {
            location: format!("field {path}"),
            message: e.to_string(),
        },
        other => other,
    }
}

fn rows(v: &[RVec]) -> Vec<Vec<Q>> {
    v.iter().map(|r| to_q(r)).collect()
}

fn check_rows(path: &str, rs: &[Vec<Q>], dim: usize) -> Result<()> {
    match rs.iter().position(|r| r.len() != dim) {
        Some(i) => Err(Error::Parse {
            location: format!("field {path}[{i}]"),
            message: format!("expected {dim} entries, found {}", rs[i].len()),
        }),
        None => Ok(()),
    }
}

impl ConeSpec {
    pub fn build(&self, path: &str) -> Result<PolyCone> {
        let (ineq, eq, lin) = (rows(&self.ineq), rows(&self.eq), rows(&self.lineality));
        check_rows(&format!("{path}.ineq"), &ineq, self.dim)?;
        check_rows(&format!("{path}.eq"), &eq, self.dim)?;
        check_rows(&format!("{path}.lineality"), &lin, self.dim)?;
        match &self.rays {
            Some(r) => {
                let r = rows(r);
                check_rows(&format!("{path}.rays"), &r, self.dim)?;
                PolyCone::from_v(self.dim, &r, &lin).map_err(field(path))
            }
            None => PolyCone::from_h(self.dim, &ineq, &eq).map_err(field(path)),
        }
    }
}

fn build_rows(path: &str, rs: &[Row], dim: usize) -> Result<Vec<(Vec<Q>, Q)>> {
    rs.iter()
        .enumerate()
        .map(|(i, r)| {
            if r.a.len() != dim {
                return Err(Error::Parse {
                    location: format!("field {path}[{i}].a"),
                    message: format!("expected {dim} entries, found {}", r.a.len()),
                });
            }
            Ok((to_q(&r.a), r.b.0.clone()))
        })
        .collect()
}

impl PolyhedronSpec {
    pub fn build(&self, path: &str) -> Result<Polyhedron> {
        match &self.points {
            Some(p) => {
                let (p, r, l) = (rows(p), rows(&self.rays), rows(&self.lineality));
                check_rows(&format!("{path}.points"), &p, self.dim)?;
                check_rows(&format!("{path}.rays"), &r, self.dim)?;
                check_rows(&format!("{path}.lineality"), &l, self.dim)?;
                Polyhedron::from_v(self.dim, &p, &r, &l).map_err(field(path))
            }
            None => {
                let ineq = build_rows(&format!("{path}.ineq"), &self.ineq, self.dim)?;
                let eq = build_rows(&format!("{path}.eq"), &self.eq, self.dim)?;
                Polyhedron::from_h(self.dim, &ineq, &eq).map_err(field(path))
            }
        }
    }

    pub fn from_polyhedron(p: &Polyhedron) -> Self {
        let row = |(a, b): (Vec<Q>, Q)| Row {
            a: to_rat(&a),
            b: Rat(b),
        };
        PolyhedronSpec {
            dim: p.dim(),
            ineq: p.ineq().into_iter().map(row).collect(),
            eq: p.eq().into_iter().map(row).collect(),
            ..Default::default()
        }
    }
}

fn build_components(path: &str, comps: &[PolyhedronSpec], dim: usize) -> Result<Vec<Polyhedron>> {
    comps
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let p = format!("{path}.components[{i}]");
            if c.dim != dim {
                return Err(Error::Parse {
                    location: format!("field {p}.dim"),
                    message: format!("expected {dim}, found {}", c.dim),
                });
            }
            c.build(&p)
        })
        .collect()
}

impl SetSpec {
    pub fn build(&self, path: &str) -> Result<PolySet> {
        PolySet::new(
            self.dim,
            build_components(path, &self.components, self.dim)?,
        )
        .map_err(field(path))
    }
}

impl MapSpec {
    pub fn build(&self, path: &str) -> Result<PolyMap> {
        let comps = build_components(path, &self.components, self.in_dim + self.out_dim)?;
        PolyMap::from_components(self.in_dim, self.out_dim, comps).map_err(field(path))
    }

    pub fn from_map(s: &PolyMap) -> Self {
        MapSpec {
            in_dim: s.in_dim(),
            out_dim: s.out_dim(),
            components: s
                .graph()
                .components()
                .iter()
                .map(PolyhedronSpec::from_polyhedron)
                .collect(),
        }
    }
}

impl PolyMapSpec {
    pub fn build(&self, path: &str) -> Result<PolynomialMap> {
        let comps = self
            .components
            .iter()
            .enumerate()
            .map(|(i, terms)| {
                let t = terms
                    .iter()
                    .map(|t| (t.coefficient.0.clone(), t.exponent.clone()))
                    .collect();
                Polynomial::from_terms(self.nvars, t)
                    .map_err(field(&format!("{path}.components[{i}]")))
            })
            .collect::<Result<Vec<_>>>()?;
        PolynomialMap::new(self.nvars, comps).map_err(field(path))
    }

    pub fn from_map(g: &PolynomialMap) -> Self {
        PolyMapSpec {
            nvars: g.nvars(),
            components: g
                .components()
                .iter()
                .map(|p| {
                    p.terms()
                        .map(|(e, c)| Term {
                            coefficient: Rat(c.clone()),
                            exponent: e.clone(),
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

impl MatrixSpec {
    pub fn build(&self, path: &str) -> Result<MatrixMap> {
        MatrixMap::new(
            self.entries.build(&format!("{path}.entries"))?,
            self.rows,
            self.cols,
        )
        .map_err(field(path))
    }
}

impl SystemSpec {
    pub fn build(&self, path: &str) -> Result<ConstraintSystem> {
        if self.params.is_some() {
            return Err(Error::Parse {
                location: format!("field {path}.params"),
                message: "plain systems take no parameters".into(),
            });
        }
        let g = self.g.build(&format!("{path}.g"))?;
        let d = self.d.build(&format!("{path}.d"))?;
        ConstraintSystem::new(g, d).map_err(field(path))
    }

    pub fn build_parametric(&self, path: &str) -> Result<ParametricSystem> {
        let g = self.g.build(&format!("{path}.g"))?;
        let d = self.d.build(&format!("{path}.d"))?;
        ParametricSystem::new(self.params.unwrap_or(0), self.n, g, d).map_err(field(path))
    }

    pub fn from_system(sys: &ConstraintSystem) -> Self {
        SystemSpec {
            params: None,
            n: sys.n(),
            g: PolyMapSpec::from_map(&sys.g),
            d: PolyhedronSpec::from_polyhedron(&sys.d),
        }
    }
}

pub fn qv(v: &[Q]) -> Value {
    Value::Array(v.iter().map(|x| Value::String(format_rat(x))).collect())
}

pub fn qm(rows: &[Vec<Q>]) -> Value {
    Value::Array(rows.iter().map(|r| qv(r)).collect())
}

pub fn cone_json(k: &PolyCone) -> Value {
    json!({
        "dim": k.dim(),
        "ineq": qm(k.ineq()),
        "eq": qm(k.eq()),
        "rays": qm(k.rays()),
        "lineality": qm(k.lineality()),
    })
}

pub fn polyhedron_json(p: &Polyhedron) -> Value {
    let rs = |rows: Vec<(Vec<Q>, Q)>| {
        Value::Array(
            rows.iter()
                .map(|(a, b)| json!({"a": qv(a), "b": format_rat(b)}))
                .collect(),
        )
    };
    json!({
        "dim": p.dim(),
        "empty": p.is_empty(),
        "ineq": rs(p.ineq()),
        "eq": rs(p.eq()),
        "vertices": qm(&p.vertices()),
        "rays": qm(&p.rays()),
        "lineality": qm(&p.lineality()),
    })
}

pub fn set_json(s: &PolySet) -> Value {
    json!({
        "dim": s.dim(),
        "components": s.components().iter().map(polyhedron_json).collect::<Vec<_>>(),
    })
}

pub fn union_json(u: &ConeUnion) -> Value {
    json!({
        "dim": u.dim(),
        "components": u.components().iter().map(cone_json).collect::<Vec<_>>(),
    })
}

pub fn rule_json(r: &RuleReport) -> Value {
    json!({
        "rule": r.rule,
        "mode": r.mode.name(),
        "lhs": set_json(&r.lhs),
        "rhs": set_json(&r.rhs),
        "relation": r.relation.map(|x| x.name()),
        "witnesses": qm(&r.witnesses),
        "assumptions": r.assumptions.iter().map(|a| json!({"name": a.name, "verdict": a.verdict.name(), "basis": a.basis})).collect::<Vec<_>>(),
        "guaranteed": r.guaranteed.map(|g| g.name()),
        "guarantee_respected": r.guarantee_respected(),
        "representatives": qm(&r.representatives),
        "numeric": r.numeric.iter().map(|c| json!({
            "inclusion": c.inclusion.name(),
            "samples": c.samples,
            "max_residual": c.max_residual,
            "tolerance": c.tolerance,
            "consistent": c.consistent(),
        })).collect::<Vec<_>>(),
        "alternative_rhs": r.alternative_rhs.as_ref().map(set_json),
        "notes": r.notes,
    })
}

pub fn schedule_json(s: &Schedule) -> Value {
    json!({"t0": s.t0, "levels": s.levels, "eps0": s.eps0, "grid": s.grid, "seed": s.seed})
}

/// Non-finite floats become strings so the report stays valid JSON.
pub fn float(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x > 0.0 {
        json!("inf")
    } else if x < 0.0 {
        json!("-inf")
    } else {
        json!("nan")
    }
}

pub fn floats(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|x| float(*x)).collect())
}

pub fn estimate_json(e: &ModulusEstimate) -> Value {
    json!({
        "direction": floats(&e.direction),
        "kind": e.kind.name(),
        "estimate": float(e.estimate),
        "diverges": e.diverges,
        "witness": e.witness.as_ref().map(|w| json!({"y": floats(&w.y), "x": floats(&w.x), "ratio": float(w.ratio)})),
        "sequences": e.sequences,
        "note": e.note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals_are_validated() {
        assert_eq!(parse_rat("-3/4").unwrap(), qr(-3, 4));
        assert_eq!(parse_rat("7").unwrap(), q(7));
        assert!(parse_rat("2/4").unwrap_err().contains("lowest terms"));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("1/-2").is_err());
        assert!(parse_rat("x").is_err());
        assert_eq!(format_rat(&qr(-3, 4)), "-3/4");
        assert_eq!(format_rat(&q(0)), "0");
    }

    #[test]
    fn parse_errors_name_the_field() {
        let text =
            r#"{"kind": "cone-op", "payload": {"cone": {"dim": 2, "ineq": [["1", "2/4"]]}}}"#;
        match ProblemFile::parse(text) {
            Err(Error::Parse { location, message }) => {
                assert!(location.contains("payload.cone.ineq[0][1]"), "{location}");
                assert!(location.contains("line 1"));
                assert!(message.contains("lowest terms"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn row_lengths_are_checked() {
        let text = r#"{"kind": "cone-op", "payload": {"cone": {"dim": 2, "ineq": [["1"]]}}}"#;
        let pf = ProblemFile::parse(text).unwrap();
        let err = pf.payload.cone.unwrap().build("payload.cone").unwrap_err();
        assert!(
            matches!(err, Error::Parse { ref location, .. } if location.contains("payload.cone.ineq[0]"))
        );
    }
}
