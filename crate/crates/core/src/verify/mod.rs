//! Definition-based oracles: sampled calmness moduli, tangent directions and the example gallery.

pub mod examples;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cones::PolySet;
use crate::geometry::linalg::{inverse, mat_mul, mat_vec, rank, transpose, vec_mat};
use crate::geometry::*;
use crate::maps::{slice, PolyMap};

/// Ratios above this are reported as divergent.
pub const DIVERGENCE: f64 = 1e6;
/// Stationarity and membership tolerance for the analytic examples.
pub const EPS: f64 = 1e-9;

/// A set-valued map `S : R^m ⇉ R^n` known only through sampling.
///
/// Implementations must be pure: the same query always gives the same answer.
pub trait MapOracle: Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    /// Nearest point of `dom S`, `None` when the domain is empty.
    fn project_domain(&self, y: &[f64]) -> Option<Vec<f64>>;
    /// Finitely many points of `S(y)`.
    fn sample_values(&self, y: &[f64]) -> Vec<Vec<f64>>;
    /// `dist(x, S(y))`, `None` when `S(y)` is empty.
    fn dist_to_values(&self, y: &[f64], x: &[f64]) -> Option<f64>;
}

/// A closed set known through its distance function.
pub trait SetOracle: Sync {
    fn dim(&self) -> usize;
    fn dist(&self, p: &[f64]) -> f64;
    fn contains(&self, p: &[f64], tol: f64) -> bool {
        self.dist(p) <= tol
    }
}

fn exact_dist(set: &PolySet, p: &[Q]) -> Option<Q> {
    set.components().iter().filter_map(|c| c.dist_sq(p)).min()
}

fn sqrt_f64(x: &Q) -> f64 {
    to_f64(x).sqrt()
}

/// Exact oracle for a union of polyhedra; floats are read as the dyadic rationals they denote.
pub struct PolySetOracle<'a>(pub &'a PolySet);

impl SetOracle for PolySetOracle<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn dist(&self, p: &[f64]) -> f64 {
        exact_dist(self.0, &vec_from_f64(p)).map_or(f64::INFINITY, |d| sqrt_f64(&d))
    }
    fn contains(&self, p: &[f64], _tol: f64) -> bool {
        self.0.contains(&vec_from_f64(p))
    }
}

/// Exact projection onto the slices `{x : (y, x) ∈ P}` of one polyhedron, for varying `y`.
///
/// The nearest point lies in the relative interior of a face, whose affine hull is cut out by
/// independent active rows; every such row set is prepared once.
struct SliceProjector {
    m: usize,
    ineq: Vec<Row>,
    eq: Vec<Row>,
    candidates: Vec<ActiveSet>,
}

type Row = (Vec<Q>, Q);

struct ActiveSet {
    rows: Vec<Row>,
    /// x-parts `B` of the rows.
    b: Vec<Vec<Q>>,
    /// `(B Bᵀ)^{-1}`.
    ginv: Vec<Vec<Q>>,
}

impl SliceProjector {
    fn new(p: &Polyhedron, m: usize) -> Self {
        let n = p.dim() - m;
        let ineq = p.ineq();
        let eq = p.eq();
        let xpart = |r: &Row| r.0[m..].to_vec();
        let mut base: Vec<Row> = Vec::new();
        for e in &eq {
            let mut rows: Vec<Vec<Q>> = base.iter().map(xpart).collect();
            rows.push(xpart(e));
            if rank(&rows, n) == rows.len() {
                base.push(e.clone());
            }
        }
        let mut candidates = Vec::new();
        let mut stack: Vec<(usize, Vec<Row>)> = vec![(0, base)];
        while let Some((start, set)) = stack.pop() {
            let b: Vec<Vec<Q>> = set.iter().map(xpart).collect();
            let ginv = if b.is_empty() {
                Vec::new()
            } else {
                inverse(&mat_mul(&b, &transpose(&b, n), b.len())).expect("independent rows")
            };
            if set.len() < n {
                for (i, row) in ineq.iter().enumerate().skip(start) {
                    let mut rows = b.clone();
                    rows.push(xpart(row));
                    if rank(&rows, n) == rows.len() {
                        let mut next = set.clone();
                        next.push(row.clone());
                        stack.push((i + 1, next));
                    }
                }
            }
            candidates.push(ActiveSet { rows: set, b, ginv });
        }
        SliceProjector {
            m,
            ineq,
            eq,
            candidates,
        }
    }

    fn feasible(&self, z: &[Q]) -> bool {
        self.eq.iter().all(|(a, b)| dot(a, z) == *b)
            && self.ineq.iter().all(|(a, b)| dot(a, z) <= *b)
    }

    fn project(&self, y: &[Q], x: &[Q]) -> Option<(Q, Vec<Q>)> {
        let mut best: Option<(Q, Vec<Q>)> = None;
        for ActiveSet { rows, b, ginv } in &self.candidates {
            let r: Vec<Q> = rows
                .iter()
                .map(|(a, c)| c - dot(&a[..self.m], y) - dot(&a[self.m..], x))
                .collect();
            let cand = if rows.is_empty() {
                x.to_vec()
            } else {
                add(x, &vec_mat(&mat_vec(ginv, &r), b, x.len()))
            };
            let d = norm_sq(&sub(&cand, x));
            if best.as_ref().is_some_and(|(bd, _)| d >= *bd) || !self.feasible(&concat(y, &cand)) {
                continue;
            }
            let done = d.is_zero();
            best = Some((d, cand));
            if done {
                break;
            }
        }
        best
    }
}

fn nearest(pieces: &[SliceProjector], y: &[Q], x: &[Q]) -> Option<(Q, Vec<Q>)> {
    pieces
        .iter()
        .filter_map(|p| p.project(y, x))
        .min_by(|a, b| a.0.cmp(&b.0))
}

/// Exact oracle for a polyhedral map.
pub struct PolyMapOracle<'a> {
    map: &'a PolyMap,
    domain: Vec<SliceProjector>,
    slices: Vec<SliceProjector>,
    pieces: Vec<PolySet>,
}

impl<'a> PolyMapOracle<'a> {
    pub fn new(map: &'a PolyMap) -> Self {
        let comps = map.graph().components();
        PolyMapOracle {
            map,
            domain: map
                .domain()
                .components()
                .iter()
                .map(|d| SliceProjector::new(d, 0))
                .collect(),
            slices: comps
                .iter()
                .map(|c| SliceProjector::new(c, map.in_dim()))
                .collect(),
            pieces: comps.iter().map(|c| PolySet::convex(c.clone())).collect(),
        }
    }
}

/// Points of a union of polyhedra: vertices, vertex plus generator, and a relative interior point.
pub fn polyset_samples(set: &PolySet) -> Vec<Vec<Q>> {
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
        pts.extend(p.relint_point());
    }
    pts.sort();
    pts.dedup();
    pts
}

impl MapOracle for PolyMapOracle<'_> {
    fn in_dim(&self) -> usize {
        self.map.in_dim()
    }
    fn out_dim(&self) -> usize {
        self.map.out_dim()
    }
    fn project_domain(&self, y: &[f64]) -> Option<Vec<f64>> {
        nearest(&self.domain, &[], &vec_from_f64(y)).map(|(_, p)| vec_to_f64(&p))
    }
    /// Samples each component slice separately, so absorbed pieces still contribute points.
    fn sample_values(&self, y: &[f64]) -> Vec<Vec<f64>> {
        let yq = vec_from_f64(y);
        let mut pts: Vec<Vec<Q>> = self
            .pieces
            .iter()
            .flat_map(|g| polyset_samples(&slice(g, &yq, true)))
            .collect();
        pts.sort();
        pts.dedup();
        pts.iter().map(|p| vec_to_f64(p)).collect()
    }
    fn dist_to_values(&self, y: &[f64], x: &[f64]) -> Option<f64> {
        nearest(&self.slices, &vec_from_f64(y), &vec_from_f64(x)).map(|(d, _)| sqrt_f64(&d))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModulusKind {
    InnerCalmStar,
    FuzzyInnerCalmStar,
    /// Inner calmness at `(ȳ, x̄)`.
    InnerCalm(Vec<f64>),
    Calm,
    /// Reports the size of the smallest selection; divergence means failure.
    InnerSemicompact,
}

impl ModulusKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModulusKind::InnerCalmStar => "inner-calmness*",
            ModulusKind::FuzzyInnerCalmStar => "fuzzy-inner-calmness*",
            ModulusKind::InnerCalm(_) => "inner-calmness",
            ModulusKind::Calm => "calmness",
            ModulusKind::InnerSemicompact => "inner-semicompactness",
        }
    }
}

/// Radii `t_k = t0·2^-k` and direction perturbations `ε_k = eps0·2^-k` for `k = 0..=levels`.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub t0: f64,
    pub levels: u32,
    pub eps0: f64,
    /// Perturbation directions per sphere slice.
    pub grid: usize,
    pub seed: u64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            t0: 1.0,
            levels: 20,
            eps0: 1e-3,
            grid: 64,
            seed: 0,
        }
    }
}

impl Schedule {
    pub fn radius(&self, k: u32) -> f64 {
        self.t0 * 0.5f64.powi(k as i32)
    }

    pub fn perturbation(&self, k: u32) -> f64 {
        self.eps0 * 0.5f64.powi(k as i32)
    }

    /// Unit perturbation directions in `R^m`, preceded by the zero vector.
    pub fn perturbations(&self, m: usize) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; m]];
        match m {
            0 => {}
            1 => out.extend([vec![1.0], vec![-1.0]]),
            2 => out.extend((0..self.grid).map(|i| {
                let a = std::f64::consts::TAU * i as f64 / self.grid as f64;
                vec![a.cos(), a.sin()]
            })),
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                while out.len() <= self.grid {
                    let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let n = norm(&v);
                    if n > 1e-3 && n <= 1.0 {
                        out.push(v.iter().map(|x| x / n).collect());
                    }
                }
            }
        }
        out
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist_points(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub ratio: f64,
}

#[derive(Clone, Debug)]
pub struct ModulusEstimate {
    pub direction: Vec<f64>,
    pub kind: ModulusKind,
    pub estimate: f64,
    pub diverges: bool,
    pub witness: Option<Witness>,
    /// Sequences that stayed in the domain.
    pub sequences: usize,
    pub schedule: Schedule,
    pub note: Option<String>,
}

struct SequenceValue {
    value: f64,
    witness: Option<Witness>,
}

/// Largest ratio along one sequence, with the maximizing witness.
fn worst<'a>(items: impl Iterator<Item = (&'a Vec<f64>, Vec<f64>, f64)>) -> SequenceValue {
    let mut best = SequenceValue {
        value: 0.0,
        witness: None,
    };
    for (y, x, r) in items {
        if best.witness.is_none() || r > best.value {
            best = SequenceValue {
                value: r,
                witness: Some(Witness {
                    y: y.clone(),
                    x,
                    ratio: r,
                }),
            };
        }
    }
    best
}

fn sequence_value(
    oracle: &dyn MapOracle,
    ybar: &[f64],
    ys: &[Vec<f64>],
    kind: &ModulusKind,
    centers: &[Vec<f64>],
) -> SequenceValue {
    let step = |y: &Vec<f64>| dist_points(y, ybar);
    match kind {
        ModulusKind::InnerCalmStar | ModulusKind::FuzzyInnerCalmStar => {
            // Per level the best center; some center recurs, giving a subsequence with this bound.
            worst(ys.iter().map(|y| {
                let mut pick = (Vec::new(), f64::INFINITY);
                for c in centers {
                    let r = oracle.dist_to_values(y, c).unwrap_or(f64::INFINITY) / step(y);
                    if r < pick.1 {
                        pick = (c.clone(), r);
                        if r == 0.0 {
                            break;
                        }
                    }
                }
                (y, pick.0, pick.1)
            }))
        }
        ModulusKind::InnerCalm(xbar) => worst(ys.iter().map(|y| {
            let d = oracle.dist_to_values(y, xbar).unwrap_or(f64::INFINITY);
            (y, xbar.clone(), d / step(y))
        })),
        ModulusKind::Calm => worst(ys.iter().flat_map(|y| {
            oracle.sample_values(y).into_iter().map(move |x| {
                let d = oracle.dist_to_values(ybar, &x).unwrap_or(f64::INFINITY);
                (y, x, d / step(y))
            })
        })),
        ModulusKind::InnerSemicompact => {
            let Some(y) = ys.last() else {
                return SequenceValue {
                    value: 0.0,
                    witness: None,
                };
            };
            let sel = oracle
                .sample_values(y)
                .into_iter()
                .map(|x| (norm(&x), x))
                .min_by(|a, b| a.0.total_cmp(&b.0));
            match sel {
                Some((n, x)) => SequenceValue {
                    value: n,
                    witness: Some(Witness {
                        y: y.clone(),
                        x,
                        ratio: n,
                    }),
                },
                None => SequenceValue {
                    value: f64::INFINITY,
                    witness: None,
                },
            }
        }
    }
}

/// Points `y_k ∈ dom S` approaching `ȳ` from `v` along the perturbation `w`.
fn build_sequence(
    oracle: &dyn MapOracle,
    ybar: &[f64],
    v: &[f64],
    w: &[f64],
    sched: &Schedule,
) -> Vec<Vec<f64>> {
    let mut ys = Vec::new();
    for k in 0..=sched.levels {
        let (t, e) = (sched.radius(k), sched.perturbation(k));
        let mut d: Vec<f64> = v.iter().zip(w).map(|(a, b)| a + e * b).collect();
        let n = norm(&d);
        d.iter_mut().for_each(|x| *x /= n);
        let target: Vec<f64> = ybar.iter().zip(&d).map(|(a, b)| a + t * b).collect();
        let Some(y) = oracle.project_domain(&target) else {
            continue;
        };
        let moved = dist_points(&y, &target);
        if moved <= 2.0 * e * t + 1e-12 * t && dist_points(&y, ybar) > 0.0 {
            ys.push(y);
        }
    }
    ys
}

/// Sampled moduli at `ȳ` in each direction, following the quantifiers of each property.
pub fn estimate_modulus(
    oracle: &dyn MapOracle,
    ybar: &[f64],
    kind: &ModulusKind,
    directions: &[Vec<f64>],
    schedule: &Schedule,
) -> Vec<ModulusEstimate> {
    let centers = oracle.sample_values(ybar);
    let perts = schedule.perturbations(oracle.in_dim());
    directions
        .par_iter()
        .map(|v| {
            let n = norm(v);
            let v: Vec<f64> = v.iter().map(|x| x / n).collect();
            let seqs: Vec<Vec<Vec<f64>>> = perts
                .iter()
                .map(|w| build_sequence(oracle, ybar, &v, w, schedule))
                .filter(|s| !s.is_empty())
                .collect();
            let mut est = ModulusEstimate {
                direction: v.clone(),
                kind: kind.clone(),
                estimate: 0.0,
                diverges: false,
                witness: None,
                sequences: seqs.len(),
                schedule: schedule.clone(),
                note: None,
            };
            if seqs.is_empty() {
                est.note = Some("v ∉ T_dom: no domain points along the direction".into());
                return est;
            }
            let values: Vec<SequenceValue> = seqs
                .iter()
                .map(|ys| sequence_value(oracle, ybar, ys, kind, &centers))
                .collect();
            let pick = if *kind == ModulusKind::FuzzyInnerCalmStar {
                values
                    .into_iter()
                    .min_by(|a, b| a.value.total_cmp(&b.value))
            } else {
                values
                    .into_iter()
                    .max_by(|a, b| a.value.total_cmp(&b.value))
            }
            .expect("nonempty");
            est.estimate = pick.value;
            est.diverges = !(pick.value <= DIVERGENCE);
            est.witness = pick.witness;
            est
        })
        .collect()
}

/// Unit directions spread over the sphere of `R^m` (a circle grid in the plane).
pub fn sphere_directions(m: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let s = Schedule {
        grid: count,
        seed,
        ..Schedule::default()
    };
    s.perturbations(m).into_iter().skip(1).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosednessVerdict {
    pub closed: bool,
    pub components_checked: usize,
}

/// Checks that `dom S ∩ (ȳ + B∞)` is closed: every piece equals the set cut out by its own
/// inequalities and contains its vertices.
pub fn domain_local_closedness_check(s: &PolyMap, ybar: &[Q]) -> ClosednessVerdict {
    let dom = s.domain();
    let m = s.in_dim();
    let bx: Vec<(Vec<Q>, Q)> = (0..m)
        .flat_map(|i| {
            [
                (unit(m, i), &ybar[i] + q(1)),
                (neg(&unit(m, i)), -(&ybar[i] - q(1))),
            ]
        })
        .collect();
    let mut closed = true;
    let mut count = 0;
    for p in dom.components() {
        let local = p.with_constraints(&bx, &[]).expect("dims");
        if local.is_empty() {
            continue;
        }
        count += 1;
        let rebuilt = Polyhedron::from_h(m, &local.ineq(), &local.eq()).expect("dims");
        closed &= rebuilt == local;
        closed &= local.vertices().iter().all(|v| dom.contains(v));
    }
    ClosednessVerdict {
        closed,
        components_checked: count,
    }
}

/// Nonzero primitive integer vectors in the box `[-r, r]^n`.
pub fn integer_directions(n: usize, r: i64) -> Vec<Vec<Q>> {
    let mut out = Vec::new();
    let mut cur = vec![-r; n];
    loop {
        if cur.iter().any(|&c| c != 0) {
            let v = qvec(&cur);
            if int_to_q(&primitive(&v)) == v {
                out.push(v);
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                return out;
            }
            if cur[i] < r {
                cur[i] += 1;
                break;
            }
            cur[i] = -r;
            i += 1;
        }
    }
}

/// Directions `u` of the grid with `x̄ + t_k u ∈ Ω` at every fine scale, decided exactly.
pub fn sample_tangent_exact(
    set: &PolySet,
    xbar: &[Q],
    grid: &[Vec<Q>],
    levels: u32,
) -> Vec<Vec<Q>> {
    let ts: Vec<Q> = (levels / 2..=levels)
        .map(|k| Q::new(1.into(), num_bigint::BigInt::from(1) << (k as usize)))
        .collect();
    grid.par_iter()
        .filter(|u| ts.iter().all(|t| set.contains(&add(xbar, &scale(u, t)))))
        .cloned()
        .collect()
}

/// Unit directions `u` with `dist(x̄ + t u, Ω) ≤ ε t` at every fine scale of the schedule.
pub fn sample_tangent_oracle(
    oracle: &dyn SetOracle,
    xbar: &[f64],
    schedule: &Schedule,
    eps: f64,
) -> Vec<Vec<f64>> {
    let dirs = sphere_directions(oracle.dim(), schedule.grid, schedule.seed);
    dirs.into_par_iter()
        .filter(|u| {
            (schedule.levels / 2..=schedule.levels).all(|k| {
                let t = schedule.radius(k);
                let p: Vec<f64> = xbar.iter().zip(u).map(|(a, b)| a + t * b).collect();
                oracle.dist(&p) <= eps * t
            })
        })
        .collect()
}

/// Verdicts along the implication chain for one map and base point.
#[derive(Clone, Debug)]
pub struct ImplicationChain {
    /// `Some(x̄)` for which inner calmness was not refuted.
    pub inner_calm_at: Option<Vec<f64>>,
    pub inner_calm_star: bool,
    pub inner_semicompact: bool,
}

impl ImplicationChain {
    pub fn consistent(&self) -> bool {
        (self.inner_calm_at.is_none() || self.inner_calm_star)
            && (!self.inner_calm_star || self.inner_semicompact)
    }
}

pub fn implication_chain(
    oracle: &dyn MapOracle,
    ybar: &[f64],
    directions: &[Vec<f64>],
    schedule: &Schedule,
) -> ImplicationChain {
    let ok = |kind: &ModulusKind| {
        estimate_modulus(oracle, ybar, kind, directions, schedule)
            .iter()
            .all(|e| !e.diverges)
    };
    let inner_calm_at = oracle
        .sample_values(ybar)
        .into_iter()
        .find(|x| ok(&ModulusKind::InnerCalm(x.clone())));
    ImplicationChain {
        inner_calm_at,
        inner_calm_star: ok(&ModulusKind::InnerCalmStar),
        inner_semicompact: ok(&ModulusKind::InnerSemicompact),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::normal_cone_graph;
    use crate::maps::calmness_bound;

    fn rminus(n: usize) -> Polyhedron {
        Polyhedron::from_cone(&PolyCone::orthant(n).polar())
    }

    #[test]
    fn exact_oracle_matches_membership() {
        let g = normal_cone_graph(&rminus(1));
        let o = PolySetOracle(&g);
        for p in [
            [0.0, 0.0],
            [-0.5, 0.0],
            [0.0, 2.0],
            [0.1, 0.0],
            [-1.0, 1e-300],
        ] {
            assert_eq!(o.contains(&p, 0.0), g.contains(&vec_from_f64(&p)));
        }
    }

    #[test]
    fn slice_projection_matches_face_enumeration() {
        let p = Polyhedron::from_h(
            3,
            &[
                (qvec(&[1, 1, 0]), q(1)),
                (qvec(&[0, -1, 2]), q(2)),
                (qvec(&[-1, 0, -1]), q(3)),
            ],
            &[],
        )
        .unwrap();
        let proj = SliceProjector::new(&p, 1);
        for y in -2..=2 {
            let slice = slice(&PolySet::convex(p.clone()), &qvec(&[y]), true);
            for x in [[5, 5], [-4, 1], [0, 0], [3, -7]] {
                let want = slice
                    .components()
                    .first()
                    .and_then(|c| c.dist_sq(&qvec(&x)));
                let got = proj.project(&qvec(&[y]), &qvec(&x)).map(|(d, _)| d);
                assert_eq!(got, want, "y {y} x {x:?}");
            }
        }
    }

    #[test]
    fn tangent_sampling_of_orthant() {
        let s = PolySet::convex(rminus(2));
        let o = PolySetOracle(&s);
        let dirs = sample_tangent_oracle(
            &o,
            &[0.0, 0.0],
            &Schedule {
                levels: 6,
                ..Schedule::default()
            },
            0.0,
        );
        assert!(!dirs.is_empty());
        assert!(dirs.iter().all(|u| u[0] <= 1e-12 && u[1] <= 1e-12));
        let exact = sample_tangent_exact(&s, &zeros(2), &integer_directions(2, 1), 6);
        assert_eq!(exact.len(), 3);
    }

    #[test]
    fn l_shaped_graph_tangents() {
        let g = normal_cone_graph(&rminus(1));
        let dirs = sample_tangent_exact(&g, &zeros(2), &integer_directions(2, 2), 8);
        assert_eq!(dirs, vec![qvec(&[-1, 0]), qvec(&[0, 1])]);
    }

    #[test]
    fn polyhedral_estimates_below_certified_constant() {
        let s = PolyMap::affine(&[qvec(&[2])], &qvec(&[0]), 1).unwrap();
        let o = PolyMapOracle::new(&s);
        let kappa = to_f64(&calmness_bound(&s, &qvec(&[0])).unwrap().kappa);
        let sched = Schedule {
            levels: 6,
            ..Schedule::default()
        };
        let dirs = vec![vec![1.0], vec![-1.0]];
        for kind in [ModulusKind::InnerCalmStar, ModulusKind::Calm] {
            for e in estimate_modulus(&o, &[0.0], &kind, &dirs, &sched) {
                assert!(e.estimate <= kappa + 1e-12, "{kind:?} {e:?}");
            }
        }
    }

    #[test]
    fn refinement_is_monotone() {
        let s = PolyMap::new(1, 1, normal_cone_graph(&rminus(1))).unwrap();
        let o = PolyMapOracle::new(&s);
        let dirs = vec![vec![-1.0], vec![1.0]];
        let coarse = estimate_modulus(
            &o,
            &[0.0],
            &ModulusKind::Calm,
            &dirs,
            &Schedule {
                levels: 3,
                ..Schedule::default()
            },
        );
        let fine = estimate_modulus(
            &o,
            &[0.0],
            &ModulusKind::Calm,
            &dirs,
            &Schedule {
                levels: 6,
                ..Schedule::default()
            },
        );
        for (c, f) in coarse.iter().zip(&fine) {
            assert!(f.estimate >= c.estimate);
        }
        assert!(fine[1].note.is_some());
    }

    #[test]
    fn domains_are_closed() {
        let s = PolyMap::new(1, 1, normal_cone_graph(&rminus(1))).unwrap();
        assert!(domain_local_closedness_check(&s, &qvec(&[0])).closed);
    }
}
