//! Calculus rules for tangents, graphical derivatives and directional normals, each with both sides evaluated.

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cones::{union_difference_witness, PolySet};
use crate::constraint::PolynomialMap;
use crate::error::{Error, Result};
use crate::geometry::linalg::{identity, mat_vec, transpose, vec_mat};
use crate::geometry::*;
use crate::maps::{graphical_derivative, slice, PolyMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Equal,
    LhsSubset,
    RhsSubset,
    Incomparable,
}

impl Relation {
    pub fn name(&self) -> &'static str {
        match self {
            Relation::Equal => "equal",
            Relation::LhsSubset => "lhs-subset",
            Relation::RhsSubset => "rhs-subset",
            Relation::Incomparable => "incomparable",
        }
    }

    pub fn lhs_in_rhs(&self) -> bool {
        matches!(self, Relation::Equal | Relation::LhsSubset)
    }

    pub fn rhs_in_lhs(&self) -> bool {
        matches!(self, Relation::Equal | Relation::RhsSubset)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Both sides computed exactly.
    Exact,
    /// The left side is sampled.
    Numeric,
    /// Only the right side (an upper estimate) is computed.
    EstimateOnly,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Numeric => "numeric",
            Mode::EstimateOnly => "estimate-only",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
    Undetermined,
}

impl Verdict {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Undetermined => "undetermined",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Assumption {
    pub name: String,
    pub verdict: Verdict,
    pub basis: String,
}

impl Assumption {
    fn new(name: &str, verdict: Verdict, basis: &str) -> Self {
        Assumption {
            name: name.into(),
            verdict,
            basis: basis.into(),
        }
    }
}

/// Which inclusion between the two sides is guaranteed by the certified hypotheses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Inclusion {
    RhsInLhs,
    LhsInRhs,
    Both,
}

impl Inclusion {
    pub fn name(&self) -> &'static str {
        match self {
            Inclusion::RhsInLhs => "rhs-in-lhs",
            Inclusion::LhsInRhs => "lhs-in-rhs",
            Inclusion::Both => "equal",
        }
    }

    fn satisfied_by(&self, r: Relation) -> bool {
        match self {
            Inclusion::RhsInLhs => r.rhs_in_lhs(),
            Inclusion::LhsInRhs => r.lhs_in_rhs(),
            Inclusion::Both => r == Relation::Equal,
        }
    }
}

/// One-sided sampled test of an inclusion.
#[derive(Clone, Debug)]
pub struct NumericCheck {
    pub inclusion: Inclusion,
    pub samples: usize,
    /// Largest relative distance at the finest scale.
    pub max_residual: f64,
    pub tolerance: f64,
}

impl NumericCheck {
    pub fn consistent(&self) -> bool {
        self.max_residual <= self.tolerance
    }
}

#[derive(Clone, Debug)]
pub struct RuleReport {
    pub rule: &'static str,
    pub mode: Mode,
    pub lhs: PolySet,
    pub rhs: PolySet,
    /// Exact relation; `None` unless both sides are exact.
    pub relation: Option<Relation>,
    /// Points in the symmetric difference certifying a strict relation.
    pub witnesses: Vec<Vec<Q>>,
    pub assumptions: Vec<Assumption>,
    pub guaranteed: Option<Inclusion>,
    pub representatives: Vec<Vec<Q>>,
    pub numeric: Vec<NumericCheck>,
    /// A second, coarser estimate where the rule has one.
    pub alternative_rhs: Option<PolySet>,
    pub notes: Vec<String>,
}

impl RuleReport {
    fn new(rule: &'static str, mode: Mode, lhs: PolySet, rhs: PolySet) -> Self {
        let (relation, witnesses) = if mode == Mode::Exact {
            let (r, w) = relate(&lhs, &rhs);
            (Some(r), w)
        } else {
            (None, Vec::new())
        };
        RuleReport {
            rule,
            mode,
            lhs,
            rhs,
            relation,
            witnesses,
            assumptions: Vec::new(),
            guaranteed: None,
            representatives: Vec::new(),
            numeric: Vec::new(),
            alternative_rhs: None,
            notes: Vec::new(),
        }
    }

    /// Whether the computed relation (or the sampled checks) agrees with the guaranteed inclusion.
    pub fn guarantee_respected(&self) -> bool {
        let exact_ok = match (self.guaranteed, self.relation) {
            (Some(g), Some(r)) => g.satisfied_by(r),
            _ => true,
        };
        exact_ok && self.numeric.iter().all(NumericCheck::consistent)
    }

    pub fn assumption(&self, name: &str) -> Option<Verdict> {
        self.assumptions
            .iter()
            .find(|a| a.name == name)
            .map(|a| a.verdict)
    }
}

/// Exact relation of two unions with witnesses for each failed inclusion.
pub fn relate(lhs: &PolySet, rhs: &PolySet) -> (Relation, Vec<Vec<Q>>) {
    let a = union_difference_witness(lhs.components(), rhs.components());
    let b = union_difference_witness(rhs.components(), lhs.components());
    match (a, b) {
        (None, None) => (Relation::Equal, Vec::new()),
        (None, Some(w)) => (Relation::LhsSubset, vec![w]),
        (Some(w), None) => (Relation::RhsSubset, vec![w]),
        (Some(w1), Some(w2)) => (Relation::Incomparable, vec![w1, w2]),
    }
}

const POLYHEDRAL_CALM: &str = "polyhedral graph: calm and inner calm* wrt its domain";
const POLYHEDRAL_SUBREG: &str = "polyhedral multifunction: metrically subregular (Robinson)";

/// Rows of the given polyhedra pulled back along `y ↦ M y + c` as hyperplanes in `y`.
fn pulled_back_rows<'a>(
    polys: impl Iterator<Item = &'a Polyhedron>,
    m: &[Vec<Q>],
    c: &[Q],
    k: usize,
) -> Vec<(Vec<Q>, Q)> {
    let mut hs = Vec::new();
    for p in polys {
        for (a, b) in p.ineq().into_iter().chain(p.eq()) {
            let row = vec_mat(&a, m, k);
            if !is_zero_vec(&row) {
                let rhs = b - dot(&a, c);
                hs.push((row, rhs));
            }
        }
    }
    hs.sort();
    hs.dedup();
    hs
}

/// One witness per cell of every component of `base`.
fn representatives(base: &PolySet, hs: &[(Vec<Q>, Q)]) -> Vec<Vec<Q>> {
    let mut reps: Vec<Vec<Q>> = base
        .components()
        .par_iter()
        .flat_map_iter(|p| cells(p, hs).into_iter().map(|c| c.witness))
        .collect();
    reps.sort();
    reps.dedup();
    reps
}

/// `y ↦ (a, y, b)` as a matrix and offset, with `a` and `b` fixed.
fn embed(before: &[Q], k: usize, after: &[Q]) -> (Vec<Vec<Q>>, Vec<Q>) {
    let total = before.len() + k + after.len();
    let m = (0..total)
        .map(|i| {
            if i >= before.len() && i < before.len() + k {
                unit(k, i - before.len())
            } else {
                zeros(k)
            }
        })
        .collect();
    let c = concat(&concat(before, &zeros(k)), after);
    debug_assert_eq!(c.len(), total);
    (m, c)
}

/// Matrix of the linear map sending a vector of length `k` to the listed coordinates.
fn selection(k: usize, picks: &[usize]) -> Vec<Vec<Q>> {
    picks.iter().map(|&i| unit(k, i)).collect()
}

fn union_all(dim: usize, parts: Vec<PolySet>) -> Result<PolySet> {
    PolySet::new(
        dim,
        parts
            .into_iter()
            .flat_map(PolySet::into_components)
            .collect(),
    )
}

fn check_len(ctx: &'static str, v: &[Q], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::dim(ctx, n, v.len()));
    }
    Ok(())
}

/// `DS(x̄,z̄) = ∪_{ȳ ∈ Ξ(x̄,z̄)} DS₂(ȳ,z̄) ∘ DS₁(x̄,ȳ)` for `S = S₂ ∘ S₁`, both sides as graphs in `(u, w)`.
pub fn chain_rule_gder(s1: &PolyMap, s2: &PolyMap, xbar: &[Q], zbar: &[Q]) -> Result<RuleReport> {
    let (n, m, s) = (s1.in_dim(), s1.out_dim(), s2.out_dim());
    if s2.in_dim() != m {
        return Err(Error::dim("chain rule inner dimension", m, s2.in_dim()));
    }
    check_len("x̄", xbar, n)?;
    check_len("z̄", zbar, s)?;
    let total = n + m + s;
    // (x, y, z) ↦ (x, y, y, z)
    let mut lift: Vec<Vec<Q>> = (0..n + m).map(|i| unit(total, i)).collect();
    lift.extend((0..m + s).map(|i| unit(total, n + i)));
    let prod = s1.graph().product(s2.graph());
    let w = prod.affine_preimage(&lift, &zeros(2 * m + n + s), total)?;
    let picks: Vec<usize> = (0..n).chain(n + m..total).collect();
    let to_xz = selection(total, &picks);
    let gph = w.linear_image(&to_xz)?;
    let base = concat(xbar, zbar);
    if !gph.contains(&base) {
        return Err(Error::pre("(x̄, z̄) is not on the graph of the composition"));
    }
    let lhs = gph.tangent_cone(&base).to_polyset();

    let (ey, cy) = embed(xbar, m, zbar);
    let xi = w.affine_preimage(&ey, &cy, m)?;
    let (e1, c1) = embed(xbar, m, &[]);
    let (e2, c2) = embed(&[], m, zbar);
    let mut hs = pulled_back_rows(s1.graph().components().iter(), &e1, &c1, m);
    hs.extend(pulled_back_rows(
        s2.graph().components().iter(),
        &e2,
        &c2,
        m,
    ));
    let reps = representatives(&xi, &hs);

    let lift_dirs = lift.clone();
    let per_rep: Vec<(PolySet, bool, bool)> = reps
        .par_iter()
        .map(|y| -> Result<(PolySet, bool, bool)> {
            let t1 = s1.graph().tangent_cone(&concat(xbar, y));
            let t2 = s2.graph().tangent_cone(&concat(y, zbar));
            let tp = t1.product(&t2);
            let comp = tp
                .linear_preimage(&lift_dirs, total)?
                .linear_image(&to_xz)?
                .to_polyset();
            let point = concat(&concat(xbar, y), &concat(y, zbar));
            let product_ok = prod.tangent_cone(&point).set_eq(&tp);
            let tw = w
                .tangent_cone(&concat(&concat(xbar, y), zbar))
                .linear_image(&to_xz)?
                .to_polyset();
            let direct_ok = comp.is_subset_of(&tw);
            Ok((comp, product_ok, direct_ok))
        })
        .collect::<Result<Vec<_>>>()?;
    let product_ok = per_rep.iter().all(|r| r.1);
    let direct_ok = per_rep.iter().all(|r| r.2);
    let rhs = union_all(n + s, per_rep.into_iter().map(|r| r.0).collect())?;

    let mut rep = RuleReport::new("chain-rule-gder", Mode::Exact, lhs, rhs);
    rep.assumptions = vec![
        Assumption::new(
            "intermediate-map-inner-calm*-fuzzy",
            Verdict::Holds,
            POLYHEDRAL_CALM,
        ),
        Assumption::new("F-metrically-subregular", Verdict::Holds, POLYHEDRAL_SUBREG),
        Assumption::new(
            "product-tangent-condition",
            Verdict::from_bool(product_ok),
            "exact tangent comparison at every representative",
        ),
        Assumption::new(
            "direct-intermediate-implication",
            Verdict::from_bool(direct_ok),
            "composed cone inside the projected tangent of gph Ξ",
        ),
    ];
    rep.guaranteed = Some(if product_ok {
        Inclusion::Both
    } else {
        Inclusion::LhsInRhs
    });
    rep.representatives = reps;
    Ok(rep)
}

/// `DS(x̄,z̄) = ∪_{ȳ ∈ Ξ(x̄,z̄)} DS₁(x̄,ȳ₁) + DS₂(x̄,ȳ₂)` for `S = S₁ + S₂`, both sides as graphs in `(u, w)`.
pub fn sum_rule_gder(s1: &PolyMap, s2: &PolyMap, xbar: &[Q], zbar: &[Q]) -> Result<RuleReport> {
    let (n, m) = (s1.in_dim(), s1.out_dim());
    if s2.in_dim() != n || s2.out_dim() != m {
        return Err(Error::dim(
            "sum rule operand",
            n + m,
            s2.in_dim() + s2.out_dim(),
        ));
    }
    check_len("x̄", xbar, n)?;
    check_len("z̄", zbar, m)?;
    let total = n + 2 * m;
    // (x, y₁, y₂) ↦ (x, y₁, x, y₂)
    let lift: Vec<Vec<Q>> = (0..n + m)
        .map(|i| unit(total, i))
        .chain((0..n).map(|i| unit(total, i)))
        .chain((0..m).map(|i| unit(total, n + m + i)))
        .collect();
    let prod = s1.graph().product(s2.graph());
    let w = prod.affine_preimage(&lift, &zeros(2 * (n + m)), total)?;
    let to_sum: Vec<Vec<Q>> = (0..n)
        .map(|i| unit(total, i))
        .chain((0..m).map(|i| add(&unit(total, n + i), &unit(total, n + m + i))))
        .collect();
    let gph = w.linear_image(&to_sum)?;
    let base = concat(xbar, zbar);
    if !gph.contains(&base) {
        return Err(Error::pre("(x̄, z̄) is not on the graph of the sum"));
    }
    let lhs = gph.tangent_cone(&base).to_polyset();

    let (ey, cy) = embed(xbar, 2 * m, &[]);
    let sum_eq: Vec<(Vec<Q>, Q)> = (0..m)
        .map(|i| (add(&unit(2 * m, i), &unit(2 * m, m + i)), zbar[i].clone()))
        .collect();
    let xi = w
        .affine_preimage(&ey, &cy, 2 * m)?
        .intersect_poly(&Polyhedron::from_h(2 * m, &[], &sum_eq)?)?;
    let first: Vec<Vec<Q>> = (0..n + m)
        .map(|i| {
            if i < n {
                zeros(2 * m)
            } else {
                unit(2 * m, i - n)
            }
        })
        .collect();
    let second: Vec<Vec<Q>> = (0..n + m)
        .map(|i| {
            if i < n {
                zeros(2 * m)
            } else {
                unit(2 * m, m + i - n)
            }
        })
        .collect();
    let cx = concat(xbar, &zeros(m));
    let mut hs = pulled_back_rows(s1.graph().components().iter(), &first, &cx, 2 * m);
    hs.extend(pulled_back_rows(
        s2.graph().components().iter(),
        &second,
        &cx,
        2 * m,
    ));
    let reps = representatives(&xi, &hs);

    let per_rep: Vec<(PolySet, bool)> = reps
        .par_iter()
        .map(|y| -> Result<(PolySet, bool)> {
            let (y1, y2) = y.split_at(m);
            let t1 = s1.graph().tangent_cone(&concat(xbar, y1));
            let t2 = s2.graph().tangent_cone(&concat(xbar, y2));
            let tp = t1.product(&t2);
            let comp = tp
                .linear_preimage(&lift, total)?
                .linear_image(&to_sum)?
                .to_polyset();
            let point = concat(&concat(xbar, y1), &concat(xbar, y2));
            Ok((comp, prod.tangent_cone(&point).set_eq(&tp)))
        })
        .collect::<Result<Vec<_>>>()?;
    let product_ok = per_rep.iter().all(|r| r.1);
    let rhs = union_all(n + m, per_rep.into_iter().map(|r| r.0).collect())?;

    let mut rep = RuleReport::new("sum-rule-gder", Mode::Exact, lhs, rhs);
    rep.assumptions = vec![
        Assumption::new(
            "intermediate-map-inner-calm*-fuzzy",
            Verdict::Holds,
            POLYHEDRAL_CALM,
        ),
        Assumption::new("product-map-subregular", Verdict::Holds, POLYHEDRAL_SUBREG),
        Assumption::new(
            "product-tangent-condition",
            Verdict::from_bool(product_ok),
            "exact tangent comparison at every representative",
        ),
    ];
    rep.guaranteed = Some(if product_ok {
        Inclusion::Both
    } else {
        Inclusion::LhsInRhs
    });
    rep.representatives = reps;
    Ok(rep)
}

/// Matrix-valued `S₁ : Q^n → Q^{m×l}` stored row-major as a polynomial map with `m·l` components.
#[derive(Clone, Debug)]
pub struct MatrixMap {
    pub map: PolynomialMap,
    pub rows: usize,
    pub cols: usize,
}

impl MatrixMap {
    pub fn new(map: PolynomialMap, rows: usize, cols: usize) -> Result<Self> {
        if map.out_dim() != rows * cols {
            return Err(Error::dim("matrix map entries", rows * cols, map.out_dim()));
        }
        Ok(MatrixMap { map, rows, cols })
    }

    pub fn constant(a: &[Vec<Q>], nvars: usize) -> Result<Self> {
        let rows = a.len();
        let cols = a.first().map_or(0, Vec::len);
        let entries: Vec<Q> = a.iter().flatten().cloned().collect();
        let zero_rows = vec![zeros(nvars); entries.len()];
        Self::new(
            PolynomialMap::affine(&zero_rows, &entries, nvars)?,
            rows,
            cols,
        )
    }

    pub fn eval(&self, x: &[Q]) -> Vec<Vec<Q>> {
        let e = self.map.eval(x);
        e.chunks(self.cols.max(1))
            .take(self.rows)
            .map(<[Q]>::to_vec)
            .collect()
    }

    pub fn is_constant(&self) -> bool {
        self.map.components().iter().all(|p| p.degree() == 0)
    }

    /// `∇⟨y, S₁⟩(x)`, an `l × n` matrix, written as the bilinear form `(y, u) ↦ ∇⟨y, S₁⟩(x) u`.
    /// Returns the `l × m` matrix of `y ↦ ∇⟨y, S₁⟩(x) u`.
    fn directional_matrix(&self, x: &[Q], u: &[Q]) -> Vec<Vec<Q>> {
        let jd = mat_vec(&self.map.jacobian(x), u);
        (0..self.cols)
            .map(|k| {
                (0..self.rows)
                    .map(|i| jd[i * self.cols + k].clone())
                    .collect()
            })
            .collect()
    }

    /// `∇⟨y, S₁⟩(x)ᵀ z*`.
    fn transposed_action(&self, x: &[Q], y: &[Q], zstar: &[Q]) -> Vec<Q> {
        let j = self.map.jacobian(x);
        let n = self.map.nvars();
        let mut out = zeros(n);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let c = &y[i] * &zstar[k];
                if !c.is_zero() {
                    for (o, jv) in out.iter_mut().zip(&j[i * self.cols + k]) {
                        *o += &c * jv;
                    }
                }
            }
        }
        out
    }
}

struct ProductSetup {
    a: Vec<Vec<Q>>,
    at: Vec<Vec<Q>>,
    reps: Vec<Vec<Q>>,
    cell_closures: Vec<(Vec<Q>, Polyhedron)>,
}

fn product_setup(s1: &MatrixMap, s2: &PolyMap, xbar: &[Q], zbar: &[Q]) -> Result<ProductSetup> {
    let (n, m, l) = (s2.in_dim(), s2.out_dim(), s1.cols);
    if s1.rows != m || s1.map.nvars() != n {
        return Err(Error::dim(
            "product rule factor",
            n * m,
            s1.map.nvars() * s1.rows,
        ));
    }
    check_len("x̄", xbar, n)?;
    check_len("z̄", zbar, l)?;
    let a = s1.eval(xbar);
    let at = transpose(&a, l);
    let eqs: Vec<(Vec<Q>, Q)> = at.iter().cloned().zip(zbar.iter().cloned()).collect();
    let xi = s2
        .eval(xbar)
        .intersect_poly(&Polyhedron::from_h(m, &[], &eqs)?)?;
    if xi.is_empty() {
        return Err(Error::pre("z̄ ∉ S₁(x̄)ᵀ S₂(x̄)"));
    }
    let (e, c) = embed(xbar, m, &[]);
    let hs = pulled_back_rows(s2.graph().components().iter(), &e, &c, m);
    let mut cell_closures: Vec<(Vec<Q>, Polyhedron)> = xi
        .components()
        .iter()
        .flat_map(|p| cells(p, &hs).into_iter().map(|c| (c.witness, c.closure)))
        .collect();
    cell_closures.sort_by(|x, y| x.0.cmp(&y.0));
    cell_closures.dedup_by(|x, y| x.0 == y.0);
    let reps = cell_closures.iter().map(|c| c.0.clone()).collect();
    Ok(ProductSetup {
        a,
        at,
        reps,
        cell_closures,
    })
}

/// Graph of `x ⇉ Aᵀ S₂(x)` for a constant matrix `A`.
fn constant_product_graph(at: &[Vec<Q>], s2: &PolyMap) -> Result<PolySet> {
    let (n, m) = (s2.in_dim(), s2.out_dim());
    let map: Vec<Vec<Q>> = (0..n)
        .map(|i| unit(n + m, i))
        .chain(at.iter().map(|r| concat(&zeros(n), r)))
        .collect();
    s2.graph().linear_image(&map)
}

/// Sampling schedule `t_k = 2^{-k}`.
const NUMERIC_SCALES: std::ops::RangeInclusive<i32> = 4..=12;
const NUMERIC_TOL: f64 = 1e-2;

fn pow2(k: i32) -> Q {
    Q::new(1.into(), num_bigint::BigInt::from(1) << (k as usize))
}

fn dist_to(set: &PolySet, p: &[Q]) -> Option<Q> {
    set.components().iter().filter_map(|c| c.dist_sq(p)).min()
}

fn nearest(set: &PolySet, p: &[Q]) -> Option<Vec<Q>> {
    set.components()
        .iter()
        .filter_map(|c| c.project(p))
        .min_by(|a, b| norm_sq(&sub(a, p)).cmp(&norm_sq(&sub(b, p))))
}

fn rel_residual(d2: &Q, scale_sq: &Q) -> f64 {
    (to_f64(d2) / to_f64(&(Q::one() + scale_sq))).sqrt()
}

/// Sample points of `set`: vertices, vertex plus ray, and relative interior points.
fn sample_points(set: &PolySet) -> Vec<Vec<Q>> {
    let mut pts = Vec::new();
    for p in set.components() {
        let verts = p.vertices();
        let dirs: Vec<Vec<Q>> = p
            .rays()
            .into_iter()
            .chain(p.lineality())
            .chain(p.lineality().iter().map(|v| neg(v)))
            .collect();
        for v in &verts {
            pts.push(v.clone());
            for d in &dirs {
                pts.push(add(v, d));
            }
        }
        if let Some(r) = p.relint_point() {
            pts.push(r);
        }
    }
    pts.sort();
    pts.dedup();
    pts
}

/// `DS(x̄,z̄)(u)` for `S(x) = S₁(x)ᵀ S₂(x)` against `∪_{ȳ} ∇⟨ȳ,S₁⟩(x̄)u + S₁(x̄)ᵀ DS₂(x̄,ȳ)(u)`.
pub fn product_rule_gder(
    s1: &MatrixMap,
    s2: &PolyMap,
    xbar: &[Q],
    zbar: &[Q],
    u: &[Q],
) -> Result<RuleReport> {
    let l = s1.cols;
    let setup = product_setup(s1, s2, xbar, zbar)?;
    check_len("u", u, s2.in_dim())?;
    let lmat = s1.directional_matrix(xbar, u);
    let constant = s1.is_constant();
    let parts: Vec<PolySet> = setup
        .cell_closures
        .par_iter()
        .map(|(y, closure)| -> Result<PolySet> {
            let d2 = graphical_derivative(s2, xbar, y)?.apply(u);
            let img = d2.linear_image(&setup.at)?;
            if constant {
                return Ok(img);
            }
            let offset = closure.linear_image(&lmat)?;
            let comps = img
                .components()
                .iter()
                .map(|c| offset.minkowski_sum(c))
                .collect::<Result<Vec<_>>>()?;
            PolySet::new(l, comps)
        })
        .collect::<Result<Vec<_>>>()?;
    let rhs = union_all(l, parts)?;
    let mut assumptions = vec![Assumption::new(
        "product-map-condition",
        Verdict::Holds,
        "S₁ is single-valued and differentiable",
    )];
    let mut rep = if constant {
        let gph = constant_product_graph(&setup.at, s2)?;
        let t = gph.tangent_cone(&concat(xbar, zbar)).to_polyset();
        let lhs = slice(&t, u, true);
        assumptions.push(Assumption::new(
            "intermediate-map-inner-calm*-fuzzy",
            Verdict::Holds,
            POLYHEDRAL_CALM,
        ));
        let mut r = RuleReport::new("product-rule-gder", Mode::Exact, lhs, rhs);
        r.guaranteed = Some(Inclusion::Both);
        r
    } else {
        assumptions.push(Assumption::new(
            "intermediate-map-inner-calm*-fuzzy",
            Verdict::Undetermined,
            "nonconstant S₁: graph of the intermediate map is not polyhedral",
        ));
        let (samples, checks) = sample_product_lhs(s1, s2, xbar, zbar, u, &rhs)?;
        let mut r = RuleReport::new("product-rule-gder", Mode::Numeric, samples, rhs);
        r.numeric = checks;
        r.guaranteed = Some(Inclusion::RhsInLhs);
        r.notes
            .push("left side sampled along x̄ + t u with t = 2^-k".into());
        r
    };
    rep.assumptions = assumptions;
    rep.representatives = setup.reps;
    Ok(rep)
}

fn product_value(s1: &MatrixMap, s2: &PolyMap, x: &[Q]) -> Result<PolySet> {
    let at = transpose(&s1.eval(x), s1.cols);
    s2.eval(x).linear_image(&at)
}

/// Difference quotients of `S(x̄ + t u)` around `z̄`, tested against `rhs` in both directions.
fn sample_product_lhs(
    s1: &MatrixMap,
    s2: &PolyMap,
    xbar: &[Q],
    zbar: &[Q],
    u: &[Q],
    rhs: &PolySet,
) -> Result<(PolySet, Vec<NumericCheck>)> {
    let l = s1.cols;
    let probes: Vec<Vec<Q>> = sample_points(rhs)
        .into_iter()
        .chain((0..l).flat_map(|i| [unit(l, i), neg(&unit(l, i))]))
        .chain(std::iter::once(zeros(l)))
        .collect();
    let k = *NUMERIC_SCALES.end();
    let t = pow2(k);
    let val = product_value(s1, s2, &add(xbar, &scale(u, &t)))?;
    let mut quotients = Vec::new();
    let mut forward = 0.0f64;
    let mut backward = 0.0f64;
    for w in &probes {
        let target = add(zbar, &scale(w, &t));
        let Some(p) = nearest(&val, &target) else {
            continue;
        };
        let qt = scale(&sub(&p, zbar), &(Q::one() / &t));
        if rhs.contains(w) {
            let d2 = norm_sq(&sub(&qt, w));
            forward = forward.max(rel_residual(&d2, &norm_sq(w)));
        }
        if let Some(d2) = dist_to(rhs, &qt) {
            backward = backward.max(rel_residual(&d2, &norm_sq(&qt)));
        } else {
            backward = f64::INFINITY;
        }
        quotients.push(Polyhedron::point(&qt));
    }
    let checks = vec![
        NumericCheck {
            inclusion: Inclusion::RhsInLhs,
            samples: probes.len(),
            max_residual: forward,
            tolerance: NUMERIC_TOL,
        },
        NumericCheck {
            inclusion: Inclusion::LhsInRhs,
            samples: quotients.len(),
            max_residual: backward,
            tolerance: NUMERIC_TOL,
        },
    ];
    Ok((PolySet::new(l, quotients)?, checks))
}

/// Directional coderivative estimate of the product rule at `(x̄,z̄)` in direction `(u,w)`, applied to `z*`.
pub fn product_rule_coderivative(
    s1: &MatrixMap,
    s2: &PolyMap,
    xbar: &[Q],
    zbar: &[Q],
    u: &[Q],
    w: &[Q],
    zstar: &[Q],
) -> Result<RuleReport> {
    let (n, m, l) = (s2.in_dim(), s2.out_dim(), s1.cols);
    let setup = product_setup(s1, s2, xbar, zbar)?;
    check_len("u", u, n)?;
    check_len("w", w, l)?;
    check_len("z*", zstar, l)?;
    let lmat = s1.directional_matrix(xbar, u);
    let az = mat_vec(&setup.a, zstar);
    let parts: Vec<PolySet> = setup
        .reps
        .par_iter()
        .map(|y| -> Result<PolySet> {
            let base = concat(xbar, y);
            let t2 = s2.graph().tangent_cone(&base).to_polyset();
            let target = sub(w, &mat_vec(&lmat, y));
            let eqs: Vec<(Vec<Q>, Q)> = setup.at.iter().cloned().zip(target).collect();
            let vs = slice(&t2, u, true).intersect_poly(&Polyhedron::from_h(m, &[], &eqs)?)?;
            let (e, c) = embed(u, m, &[]);
            let hs = pulled_back_rows(t2.components().iter(), &e, &c, m);
            let offset = s1.transposed_action(xbar, y, zstar);
            let mut comps = Vec::new();
            for v in representatives(&vs, &hs) {
                let nc = s2
                    .graph()
                    .directional_limiting_normal_cone(&base, &concat(u, &v));
                let dstar = slice(&nc.to_polyset(), &neg(&az), false);
                for c in dstar.components() {
                    comps.push(c.translate(&offset)?);
                }
            }
            PolySet::new(n, comps)
        })
        .collect::<Result<Vec<_>>>()?;
    let rhs = union_all(n, parts)?;
    let mut rep = if s1.is_constant() {
        let gph = constant_product_graph(&setup.at, s2)?;
        let nc = gph.directional_limiting_normal_cone(&concat(xbar, zbar), &concat(u, w));
        let lhs = slice(&nc.to_polyset(), &neg(zstar), false);
        let mut r = RuleReport::new("product-rule-coderivative", Mode::Exact, lhs, rhs);
        r.assumptions.push(Assumption::new(
            "intermediate-map-inner-calm*-in-direction",
            Verdict::Holds,
            POLYHEDRAL_CALM,
        ));
        r.guaranteed = Some(Inclusion::LhsInRhs);
        r
    } else {
        let mut r = RuleReport::new(
            "product-rule-coderivative",
            Mode::EstimateOnly,
            PolySet::empty(n),
            rhs,
        );
        r.assumptions.push(Assumption::new(
            "intermediate-map-inner-calm*-in-direction",
            Verdict::Undetermined,
            "nonconstant S₁; use the constraint-system certificates for normal cone maps",
        ));
        r.notes.push(
            "directional derivative of the intermediate map linearized at each representative"
                .into(),
        );
        r
    };
    rep.representatives = setup.reps;
    Ok(rep)
}

/// Affine data `(M, c)` of `φ`, or `None` when `φ` is not affine.
fn affine_parts(phi: &PolynomialMap) -> Option<(Vec<Vec<Q>>, Vec<Q>)> {
    phi.is_affine().then(|| {
        let o = zeros(phi.nvars());
        (phi.jacobian(&o), phi.eval(&o))
    })
}

fn fiber(c: &PolySet, m: &[Vec<Q>], rhs: &[Q]) -> Result<PolySet> {
    let eqs: Vec<(Vec<Q>, Q)> = m.iter().cloned().zip(rhs.iter().cloned()).collect();
    c.intersect_poly(&Polyhedron::from_h(c.dim(), &[], &eqs)?)
}

fn all_rows(c: &PolySet) -> Vec<(Vec<Q>, Q)> {
    let n = c.dim();
    pulled_back_rows(c.components().iter(), &identity(n), &zeros(n), n)
}

/// `T_Q(ȳ)` for `Q = φ(C)` against `∪_{x̄ ∈ Ψ(ȳ)} ∇φ(x̄) T_C(x̄)`.
///
/// For affine `φ` both sides are exact. Otherwise the fiber `Ψ(ȳ)` is taken from `candidates`
/// and the left side is sampled near them.
pub fn image_tangent_rule(
    c: &PolySet,
    phi: &PolynomialMap,
    ybar: &[Q],
    candidates: &[Vec<Q>],
) -> Result<RuleReport> {
    if phi.nvars() != c.dim() {
        return Err(Error::dim("image map variables", c.dim(), phi.nvars()));
    }
    let l = phi.out_dim();
    check_len("ȳ", ybar, l)?;
    if let Some((m, c0)) = affine_parts(phi) {
        let q = c.affine_image(&m, &c0)?;
        if !q.contains(ybar) {
            return Err(Error::pre("ȳ is not in φ(C)"));
        }
        let lhs = q.tangent_cone(ybar).to_polyset();
        let psi = fiber(c, &m, &sub(ybar, &c0))?;
        let reps = representatives(&psi, &all_rows(c));
        let parts = reps
            .par_iter()
            .map(|x| Ok(c.tangent_cone(x).linear_image(&m)?.to_polyset()))
            .collect::<Result<Vec<_>>>()?;
        let rhs = union_all(l, parts)?;
        let mut rep = RuleReport::new("image-tangent", Mode::Exact, lhs, rhs);
        rep.assumptions.push(Assumption::new(
            "fiber-map-inner-calm*-fuzzy",
            Verdict::Holds,
            POLYHEDRAL_CALM,
        ));
        rep.guaranteed = Some(Inclusion::Both);
        rep.representatives = reps;
        return Ok(rep);
    }
    if candidates.is_empty() {
        return Err(Error::pre(
            "a nonaffine φ needs candidate points of the fiber φ⁻¹(ȳ) ∩ C",
        ));
    }
    for x in candidates {
        check_len("fiber candidate", x, c.dim())?;
        if !c.contains(x) || phi.eval(x) != ybar {
            return Err(Error::pre("fiber candidate is not in φ⁻¹(ȳ) ∩ C"));
        }
    }
    let parts = candidates
        .iter()
        .map(|x| {
            Ok(c.tangent_cone(x)
                .linear_image(&phi.jacobian(x))?
                .to_polyset())
        })
        .collect::<Result<Vec<_>>>()?;
    let rhs = union_all(l, parts)?;
    let (samples, check) = sample_image_directions(c, phi, ybar, candidates, &rhs)?;
    let mut rep = RuleReport::new("image-tangent", Mode::Numeric, samples, rhs);
    rep.numeric.push(check);
    rep.assumptions.push(Assumption::new(
        "fiber-map-inner-calm*-fuzzy",
        Verdict::Undetermined,
        "nonaffine φ: fiber supplied by the caller",
    ));
    rep.guaranteed = Some(Inclusion::RhsInLhs);
    rep.representatives = candidates.to_vec();
    rep.notes
        .push("left side sampled from C near the fiber candidates".into());
    Ok(rep)
}

/// Normalized directions `(φ(x) − ȳ)/|φ(x) − ȳ|` for random `x ∈ C` near the candidates.
fn sample_image_directions(
    c: &PolySet,
    phi: &PolynomialMap,
    ybar: &[Q],
    candidates: &[Vec<Q>],
    rhs: &PolySet,
) -> Result<(PolySet, NumericCheck)> {
    let n = c.dim();
    let l = phi.out_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let r = pow2(*NUMERIC_SCALES.end());
    let mut dirs = Vec::new();
    let mut residual = 0.0f64;
    for x in candidates {
        let bx: Vec<(Vec<Q>, Q)> = (0..n)
            .flat_map(|i| [(unit(n, i), &x[i] + &r), (neg(&unit(n, i)), -(&x[i] - &r))])
            .collect();
        for p in c.components() {
            let boxed = p.with_constraints(&bx, &[])?;
            if boxed.is_empty() {
                continue;
            }
            let verts = boxed.vertices();
            for _ in 0..16 {
                let weights: Vec<Q> = verts.iter().map(|_| q(rng.gen_range(0..8))).collect();
                let total: Q = weights.iter().sum();
                if total.is_zero() {
                    continue;
                }
                let mut pt = zeros(n);
                for (v, wt) in verts.iter().zip(&weights) {
                    pt = add(&pt, &scale(v, &(wt / &total)));
                }
                let d = sub(&phi.eval(&pt), ybar);
                if is_zero_vec(&d) {
                    continue;
                }
                let norm = to_f64(&norm_sq(&d)).sqrt();
                let dq: Vec<Q> = d.iter().map(|v| from_f64(to_f64(v) / norm, 24)).collect();
                let res = dist_to(rhs, &dq).map_or(f64::INFINITY, |d2| to_f64(&d2).sqrt());
                residual = residual.max(res);
                dirs.push(Polyhedron::point(&dq));
            }
        }
    }
    let check = NumericCheck {
        inclusion: Inclusion::LhsInRhs,
        samples: dirs.len(),
        max_residual: residual,
        tolerance: NUMERIC_TOL,
    };
    Ok((PolySet::new(l, dirs)?, check))
}

/// `N_Q(ȳ; v)` for `Q = φ(C)` with affine `φ`, against the inner-calmness* estimate; the
/// inner-semicompactness estimate is reported as `alternative_rhs`.
pub fn image_directional_normal_rule(
    c: &PolySet,
    phi: &PolynomialMap,
    ybar: &[Q],
    v: &[Q],
) -> Result<RuleReport> {
    if phi.nvars() != c.dim() {
        return Err(Error::dim("image map variables", c.dim(), phi.nvars()));
    }
    let (m, c0) = affine_parts(phi)
        .ok_or_else(|| Error::Unsupported("directional normal rule requires an affine φ".into()))?;
    let (n, l) = (c.dim(), phi.out_dim());
    check_len("ȳ", ybar, l)?;
    check_len("v", v, l)?;
    let q = c.affine_image(&m, &c0)?;
    if !q.contains(ybar) {
        return Err(Error::pre("ȳ is not in φ(C)"));
    }
    let lhs = q.directional_limiting_normal_cone(ybar, v).to_polyset();
    let psi = fiber(c, &m, &sub(ybar, &c0))?;
    let reps = representatives(&psi, &all_rows(c));
    let mt = transpose(&m, n);
    let sigma = |x: &[Q], u: &[Q]| -> Result<PolySet> {
        Ok(c.directional_limiting_normal_cone(x, u)
            .linear_preimage(&mt, l)?
            .to_polyset())
    };
    let per_rep: Vec<(PolySet, PolySet)> = reps
        .par_iter()
        .map(|x| -> Result<(PolySet, PolySet)> {
            let t = c.tangent_cone(x).to_polyset();
            let trows = all_rows(&t);
            let us = fiber(&t, &m, v)?;
            let main = representatives(&us, &trows)
                .iter()
                .map(|u| sigma(x, u))
                .collect::<Result<Vec<_>>>()?;
            let mut extra = Vec::new();
            for cell in fiber(&t, &m, &zeros(l))?
                .components()
                .iter()
                .flat_map(|p| cells(p, &trows))
            {
                let u = if !is_zero_vec(&cell.witness) {
                    Some(cell.witness)
                } else {
                    cell.closure
                        .lineality()
                        .into_iter()
                        .next()
                        .or_else(|| cell.closure.rays().into_iter().next())
                };
                if let Some(u) = u {
                    extra.push(sigma(x, &u)?);
                }
            }
            Ok((union_all(l, main)?, union_all(l, extra)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let (main, extra): (Vec<PolySet>, Vec<PolySet>) = per_rep.into_iter().unzip();
    let rhs = union_all(l, main)?;
    let rhs_i = rhs.union(&union_all(l, extra)?)?;
    let mut rep = RuleReport::new("image-directional-normal", Mode::Exact, lhs, rhs);
    let nested = rep.rhs.is_subset_of(&rhs_i);
    rep.assumptions = vec![
        Assumption::new(
            "fiber-map-inner-calm*-in-direction",
            Verdict::Holds,
            POLYHEDRAL_CALM,
        ),
        Assumption::new(
            "calm-estimate-inside-semicompact-estimate",
            Verdict::from_bool(nested),
            "exact inclusion test",
        ),
    ];
    rep.guaranteed = Some(Inclusion::LhsInRhs);
    rep.alternative_rhs = Some(rhs_i);
    rep.representatives = reps;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::normal_cone_graph;
    use crate::constraint::Polynomial;

    fn rminus(n: usize) -> Polyhedron {
        Polyhedron::from_cone(&PolyCone::orthant(n).polar())
    }

    fn proj_first(n: usize) -> PolynomialMap {
        PolynomialMap::affine(&[unit(n, 0)], &zeros(1), n).unwrap()
    }

    #[test]
    fn image_tangent_of_normal_graph_projection() {
        let c = normal_cone_graph(&rminus(1));
        let r = image_tangent_rule(&c, &proj_first(2), &qvec(&[0]), &[]).unwrap();
        assert_eq!(r.relation, Some(Relation::Equal));
        assert!(r.lhs.set_eq(&PolySet::convex(rminus(1))));
        assert!(r.guarantee_respected());
    }

    #[test]
    fn image_tangent_identity() {
        let boxp =
            Polyhedron::from_h(2, &[(qvec(&[1, 1]), q(1)), (qvec(&[-1, 0]), q(0))], &[]).unwrap();
        let c = PolySet::convex(boxp.clone());
        let y = qvec(&[0, 1]);
        let r = image_tangent_rule(&c, &PolynomialMap::identity(2), &y, &[]).unwrap();
        assert_eq!(r.relation, Some(Relation::Equal));
        assert!(r.lhs.set_eq(&PolySet::convex(Polyhedron::from_cone(
            &boxp.tangent_cone(&y).unwrap()
        ))));
    }

    #[test]
    fn image_tangent_numeric_square() {
        // φ(x) = x², C = R: T_Q(0) = R₊ but ∇φ(0) T_C(0) = {0}
        let phi = PolynomialMap::new(
            1,
            vec![Polynomial::from_terms(1, vec![(q(1), vec![2])]).unwrap()],
        )
        .unwrap();
        let c = PolySet::convex(Polyhedron::universe(1));
        let r = image_tangent_rule(&c, &phi, &qvec(&[0]), &[qvec(&[0])]).unwrap();
        assert_eq!(r.mode, Mode::Numeric);
        assert!(r
            .rhs
            .set_eq(&PolySet::convex(Polyhedron::point(&qvec(&[0])))));
        assert!(!r.numeric[0].consistent());
        // φ(x) = x + x², locally invertible: the estimate holds
        let phi = PolynomialMap::new(
            1,
            vec![Polynomial::from_terms(1, vec![(q(1), vec![1]), (q(1), vec![2])]).unwrap()],
        )
        .unwrap();
        let r = image_tangent_rule(&c, &phi, &qvec(&[0]), &[qvec(&[0])]).unwrap();
        assert!(r.numeric[0].consistent());
    }

    #[test]
    fn directional_normal_projection() {
        let c = normal_cone_graph(&rminus(1));
        let r =
            image_directional_normal_rule(&c, &proj_first(2), &qvec(&[0]), &qvec(&[-1])).unwrap();
        let origin = PolySet::convex(Polyhedron::point(&qvec(&[0])));
        assert!(r.lhs.set_eq(&origin));
        assert!(r.rhs.contains(&qvec(&[0])));
        assert_eq!(r.relation, Some(Relation::Equal));
        assert_eq!(
            r.assumption("calm-estimate-inside-semicompact-estimate"),
            Some(Verdict::Holds)
        );
    }

    #[test]
    fn directional_normal_identity() {
        let c = PolySet::convex(rminus(2));
        for v in [[-1, -1], [0, -1], [0, 0]] {
            let r = image_directional_normal_rule(
                &c,
                &PolynomialMap::identity(2),
                &zeros(2),
                &qvec(&v),
            )
            .unwrap();
            assert_eq!(r.relation, Some(Relation::Equal), "{v:?}");
        }
    }

    fn step_map() -> PolyMap {
        // N_{R₋}
        PolyMap::new(1, 1, normal_cone_graph(&rminus(1))).unwrap()
    }

    #[test]
    fn chain_with_identity() {
        let s2 = step_map();
        let o = qvec(&[0]);
        let r = chain_rule_gder(&PolyMap::identity(1), &s2, &o, &o).unwrap();
        assert_eq!(r.relation, Some(Relation::Equal));
        assert!(r
            .lhs
            .set_eq(&s2.graph().tangent_cone(&zeros(2)).to_polyset()));
        let r = chain_rule_gder(&s2, &PolyMap::identity(1), &o, &o).unwrap();
        assert_eq!(r.relation, Some(Relation::Equal));
        assert_eq!(
            r.assumption("product-tangent-condition"),
            Some(Verdict::Holds)
        );
    }

    #[test]
    fn chain_through_set_valued_inner_map() {
        // S₁ = N_{R₋} (set valued at 0), S₂ = inverse of S₁
        let s1 = step_map();
        let s2 = s1.inverse();
        let o = qvec(&[0]);
        let r = chain_rule_gder(&s1, &s2, &o, &o).unwrap();
        assert_eq!(r.relation, Some(Relation::Equal));
        assert!(r.representatives.len() >= 2);
        assert!(r.guarantee_respected());
    }

    #[test]
    fn sum_with_affine_summand() {
        let s1 = PolyMap::affine(&[qvec(&[2])], &qvec(&[1]), 1).unwrap();
        let s2 = step_map();
        let r = sum_rule_gder(&s1, &s2, &qvec(&[0]), &qvec(&[3])).unwrap();
        assert_eq!(r.relation, Some(Relation::Equal));
        // DS(u) = 2u + DS₂(0, 2)(u), and DS₂(0,2) has graph {u = 0}
        assert!(r.lhs.contains(&qvec(&[0, 7])));
        assert!(!r.lhs.contains(&qvec(&[1, 2])));
        let r = sum_rule_gder(
            &PolyMap::identity(1),
            &PolyMap::identity(1),
            &qvec(&[1]),
            &qvec(&[2]),
        )
        .unwrap();
        let doubling = PolyMap::affine(&[qvec(&[2])], &qvec(&[0]), 1).unwrap();
        assert!(r.lhs.set_eq(doubling.graph()));
        assert_eq!(r.relation, Some(Relation::Equal));
    }

    #[test]
    fn product_with_constant_matrix() {
        let s2 = PolyMap::new(
            1,
            2,
            normal_cone_graph(&rminus(1))
                .product(&PolySet::convex(Polyhedron::universe(1)))
                .linear_image(&[qvec(&[1, 0, 0]), qvec(&[0, 1, 0]), qvec(&[0, 0, 1])])
                .unwrap(),
        )
        .unwrap();
        let a = MatrixMap::constant(&[qvec(&[1]), qvec(&[1])], 1).unwrap();
        let o = qvec(&[0]);
        for u in [-1, 0, 1] {
            let r = product_rule_gder(&a, &s2, &o, &o, &qvec(&[u])).unwrap();
            assert_eq!(r.relation, Some(Relation::Equal), "u = {u}");
        }
        let id = MatrixMap::constant(&[qvec(&[1])], 1).unwrap();
        let r = product_rule_gder(&id, &step_map(), &o, &o, &o).unwrap();
        assert_eq!(r.relation, Some(Relation::Equal));
        let r = product_rule_coderivative(&id, &step_map(), &o, &o, &o, &qvec(&[1]), &qvec(&[1]))
            .unwrap();
        assert!(r.relation.unwrap().lhs_in_rhs());
    }

    #[test]
    fn product_with_linear_factor() {
        // S₁(x) = x (1×1), S₂ ≡ [1, 2]: S(x) = [x, 2x], DS(1,1)(u) = [u, 2u]
        let s1 = MatrixMap::new(PolynomialMap::identity(1), 1, 1).unwrap();
        let seg =
            Polyhedron::from_h(2, &[(qvec(&[0, -1]), q(-1)), (qvec(&[0, 1]), q(2))], &[]).unwrap();
        let s2 = PolyMap::from_components(1, 1, vec![seg]).unwrap();
        let r = product_rule_gder(&s1, &s2, &qvec(&[1]), &qvec(&[1]), &qvec(&[1])).unwrap();
        assert_eq!(r.mode, Mode::Numeric);
        assert!(r.rhs.contains(&qvec(&[1])));
        assert!(r.rhs.contains(&qvec(&[5])));
        assert!(
            r.numeric.iter().all(NumericCheck::consistent),
            "{:?}",
            r.numeric
        );
    }
}
