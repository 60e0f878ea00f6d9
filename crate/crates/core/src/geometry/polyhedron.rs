use std::collections::{BTreeSet, VecDeque};

use num_traits::{One, Signed, Zero};

use super::dd::double_description;
use super::linalg::{inverse, mat_vec, reduce_mod, rref, transpose, vec_mat};
use super::rational::*;
use crate::error::{Error, Result};

/// Polyhedral convex cone kept in canonical double description form.
///
/// `ineq`/`eq` describe `{x : a·x <= 0, e·x = 0}` and `rays`/`lineality` generate the same set.
/// Both sides are irredundant primitive integer vectors, so derived equality is set equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PolyCone {
    dim: usize,
    ineq: Vec<Vec<Q>>,
    eq: Vec<Vec<Q>>,
    rays: Vec<Vec<Q>>,
    lineality: Vec<Vec<Q>>,
}

/// Canonical `(rays, basis)` of a cone given by raw generators.
fn canon_generators(dim: usize, rays: &[Vec<Q>], lin: &[Vec<Q>]) -> (Vec<Vec<Q>>, Vec<Vec<Q>>) {
    let (basis, piv) = rref(lin, dim);
    let mut out: Vec<Vec<Q>> = rays
        .iter()
        .map(|r| reduce_mod(r, &basis, &piv))
        .filter(|r| !is_zero_vec(r))
        .map(|r| int_to_q(&primitive(&r)))
        .collect();
    out.sort();
    out.dedup();
    let basis = basis.iter().map(|b| int_to_q(&primitive(b))).collect();
    (out, basis)
}

fn to_int(rows: &[Vec<Q>]) -> Vec<Vec<Z>> {
    rows.iter().map(|r| primitive(r)).collect()
}

fn check_dims(context: &'static str, dim: usize, rows: &[Vec<Q>]) -> Result<()> {
    for r in rows {
        if r.len() != dim {
            return Err(Error::dim(context, dim, r.len()));
        }
    }
    Ok(())
}

/// Generators of `{x : A x <= 0, E x = 0}` in canonical form.
fn dd_canon(dim: usize, ineq: &[Vec<Q>], eq: &[Vec<Q>]) -> (Vec<Vec<Q>>, Vec<Vec<Q>>) {
    let g = double_description(&to_int(ineq), &to_int(eq), dim);
    canon_generators(dim, &int_to_q_rows(&g.rays), &int_to_q_rows(&g.lineality))
}

fn int_to_q_rows(rows: &[Vec<Z>]) -> Vec<Vec<Q>> {
    rows.iter().map(|r| int_to_q(r)).collect()
}

impl PolyCone {
    /// `{x : a·x <= 0 for a in ineq, e·x = 0 for e in eq}`.
    pub fn from_h(dim: usize, ineq: &[Vec<Q>], eq: &[Vec<Q>]) -> Result<Self> {
        check_dims("cone inequality row", dim, ineq)?;
        check_dims("cone equality row", dim, eq)?;
        let (rays, lineality) = dd_canon(dim, ineq, eq);
        let (ineq, eq) = dd_canon(dim, &rays, &lineality);
        Ok(PolyCone {
            dim,
            ineq,
            eq,
            rays,
            lineality,
        })
    }

    /// Conic hull of `rays` plus the span of `lineality`.
    pub fn from_v(dim: usize, rays: &[Vec<Q>], lineality: &[Vec<Q>]) -> Result<Self> {
        check_dims("cone ray", dim, rays)?;
        check_dims("cone lineality vector", dim, lineality)?;
        let (ineq, eq) = dd_canon(dim, rays, lineality);
        let (rays, lineality) = dd_canon(dim, &ineq, &eq);
        Ok(PolyCone {
            dim,
            ineq,
            eq,
            rays,
            lineality,
        })
    }

    pub fn zero(dim: usize) -> Self {
        PolyCone::from_v(dim, &[], &[]).expect("consistent dims")
    }

    pub fn full(dim: usize) -> Self {
        PolyCone::from_h(dim, &[], &[]).expect("consistent dims")
    }

    /// Nonnegative orthant.
    pub fn orthant(dim: usize) -> Self {
        let rays: Vec<Vec<Q>> = (0..dim).map(|i| unit(dim, i)).collect();
        PolyCone::from_v(dim, &rays, &[]).expect("consistent dims")
    }

    pub fn subspace(dim: usize, basis: &[Vec<Q>]) -> Result<Self> {
        PolyCone::from_v(dim, &[], basis)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn ineq(&self) -> &[Vec<Q>] {
        &self.ineq
    }
    pub fn eq(&self) -> &[Vec<Q>] {
        &self.eq
    }
    pub fn rays(&self) -> &[Vec<Q>] {
        &self.rays
    }
    pub fn lineality(&self) -> &[Vec<Q>] {
        &self.lineality
    }

    pub fn is_zero(&self) -> bool {
        self.rays.is_empty() && self.lineality.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.lineality.len() == self.dim
    }

    pub fn is_subspace(&self) -> bool {
        self.rays.is_empty()
    }

    /// Dimension of the linear hull.
    pub fn span_dim(&self) -> usize {
        self.dim - self.eq.len()
    }

    /// Basis of the linear hull.
    pub fn span_basis(&self) -> Vec<Vec<Q>> {
        super::linalg::nullspace(&self.eq, self.dim)
    }

    /// `{y : ⟨y, x⟩ <= 0 for all x in K}`.
    pub fn polar(&self) -> Self {
        PolyCone {
            dim: self.dim,
            ineq: self.rays.clone(),
            eq: self.lineality.clone(),
            rays: self.ineq.clone(),
            lineality: self.eq.clone(),
        }
    }

    pub fn contains(&self, x: &[Q]) -> bool {
        x.len() == self.dim
            && self.eq.iter().all(|e| dot(e, x).is_zero())
            && self.ineq.iter().all(|a| !dot(a, x).is_positive())
    }

    /// Whether `x` lies in the relative interior.
    pub fn contains_relint(&self, x: &[Q]) -> bool {
        x.len() == self.dim
            && self.eq.iter().all(|e| dot(e, x).is_zero())
            && self.ineq.iter().all(|a| dot(a, x).is_negative())
    }

    pub fn contains_cone(&self, other: &PolyCone) -> bool {
        other.rays.iter().all(|r| self.contains(r))
            && other
                .lineality
                .iter()
                .all(|l| self.contains(l) && self.contains(&neg(l)))
    }

    pub fn intersect(&self, other: &PolyCone) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::dim("cone intersection", self.dim, other.dim));
        }
        let ineq: Vec<Vec<Q>> = self.ineq.iter().chain(&other.ineq).cloned().collect();
        let eq: Vec<Vec<Q>> = self.eq.iter().chain(&other.eq).cloned().collect();
        PolyCone::from_h(self.dim, &ineq, &eq)
    }

    /// Minkowski sum.
    pub fn sum(&self, other: &PolyCone) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::dim("cone sum", self.dim, other.dim));
        }
        let rays: Vec<Vec<Q>> = self.rays.iter().chain(&other.rays).cloned().collect();
        let lin: Vec<Vec<Q>> = self
            .lineality
            .iter()
            .chain(&other.lineality)
            .cloned()
            .collect();
        PolyCone::from_v(self.dim, &rays, &lin)
    }

    /// `{M x : x in K}` for a `k × dim` matrix `M`.
    pub fn linear_image(&self, m: &[Vec<Q>]) -> Result<Self> {
        check_dims("image matrix row", self.dim, m)?;
        let rays: Vec<Vec<Q>> = self.rays.iter().map(|r| mat_vec(m, r)).collect();
        let lin: Vec<Vec<Q>> = self.lineality.iter().map(|l| mat_vec(m, l)).collect();
        PolyCone::from_v(m.len(), &rays, &lin)
    }

    /// `{x : M x in K}` for a `dim × n` matrix `M`.
    pub fn linear_preimage(&self, m: &[Vec<Q>], n: usize) -> Result<Self> {
        if m.len() != self.dim {
            return Err(Error::dim("preimage matrix rows", self.dim, m.len()));
        }
        check_dims("preimage matrix row", n, m)?;
        let ineq: Vec<Vec<Q>> = self.ineq.iter().map(|a| vec_mat(a, m, n)).collect();
        let eq: Vec<Vec<Q>> = self.eq.iter().map(|e| vec_mat(e, m, n)).collect();
        PolyCone::from_h(n, &ineq, &eq)
    }

    /// Cartesian product `K × L`.
    pub fn product(&self, other: &PolyCone) -> Self {
        let d = self.dim + other.dim;
        let left = |v: &Vec<Q>| concat(v, &zeros(other.dim));
        let right = |v: &Vec<Q>| concat(&zeros(self.dim), v);
        let ineq: Vec<Vec<Q>> = self
            .ineq
            .iter()
            .map(left)
            .chain(other.ineq.iter().map(right))
            .collect();
        let eq: Vec<Vec<Q>> = self
            .eq
            .iter()
            .map(left)
            .chain(other.eq.iter().map(right))
            .collect();
        let rays: Vec<Vec<Q>> = self
            .rays
            .iter()
            .map(left)
            .chain(other.rays.iter().map(right))
            .collect();
        let lineality: Vec<Vec<Q>> = self
            .lineality
            .iter()
            .map(left)
            .chain(other.lineality.iter().map(right))
            .collect();
        let (rays, lineality) = canon_generators(d, &rays, &lineality);
        let (ineq, eq) = canon_generators(d, &ineq, &eq);
        PolyCone {
            dim: d,
            ineq,
            eq,
            rays,
            lineality,
        }
    }

    /// A point in the relative interior.
    pub fn relint_point(&self) -> Vec<Q> {
        self.rays
            .iter()
            .fold(zeros(self.dim), |acc, r| add(&acc, r))
    }

    /// Tangent cone of `K` at a point `x` of `K`.
    pub fn tangent_at(&self, x: &[Q]) -> Result<Self> {
        if !self.contains(x) {
            return Err(Error::pre("point is not in the cone"));
        }
        let active: Vec<Vec<Q>> = self
            .ineq
            .iter()
            .filter(|a| dot(a, x).is_zero())
            .cloned()
            .collect();
        PolyCone::from_h(self.dim, &active, &self.eq)
    }

    /// Normal cone of `K` at a point `x` of `K`.
    pub fn normal_at(&self, x: &[Q]) -> Result<Self> {
        Ok(self.tangent_at(x)?.polar())
    }

    /// All faces, each with a relative interior witness. The first entry is `K` itself.
    pub fn faces(&self) -> Vec<ConeFace> {
        let all: BTreeSet<usize> = (0..self.rays.len()).collect();
        let mut seen: BTreeSet<BTreeSet<usize>> = BTreeSet::new();
        let mut queue = VecDeque::from([all.clone()]);
        seen.insert(all);
        let mut sets = Vec::new();
        while let Some(s) = queue.pop_front() {
            for a in &self.ineq {
                let sub: BTreeSet<usize> = s
                    .iter()
                    .copied()
                    .filter(|&i| dot(a, &self.rays[i]).is_zero())
                    .collect();
                if seen.insert(sub.clone()) {
                    queue.push_back(sub);
                }
            }
            sets.push(s);
        }
        sets.into_iter()
            .map(|s| {
                let rays: Vec<Vec<Q>> = s.iter().map(|&i| self.rays[i].clone()).collect();
                let cone =
                    PolyCone::from_v(self.dim, &rays, &self.lineality).expect("consistent dims");
                let witness = cone.relint_point();
                ConeFace {
                    ray_indices: s.into_iter().collect(),
                    cone,
                    witness,
                }
            })
            .collect()
    }
}

/// A face of a polyhedral cone.
#[derive(Clone, Debug)]
pub struct ConeFace {
    /// Indices into the parent's ray list.
    pub ray_indices: Vec<usize>,
    pub cone: PolyCone,
    pub witness: Vec<Q>,
}

/// Convex polyhedron `{x : A x <= b, E x = e}` stored through its homogenization
/// `cl cone(P × {1})`, whose canonical form makes derived equality set equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Polyhedron {
    dim: usize,
    empty: bool,
    hom: PolyCone,
}

/// A nonempty face of a polyhedron.
#[derive(Clone, Debug)]
pub struct PolyhedronFace {
    pub poly: Polyhedron,
    pub witness: Vec<Q>,
}

impl Polyhedron {
    fn from_hom(dim: usize, hom: PolyCone) -> Self {
        let nonempty = hom.rays.iter().any(|r| r[dim].is_positive());
        if nonempty {
            Polyhedron {
                dim,
                empty: false,
                hom,
            }
        } else {
            Polyhedron::empty(dim)
        }
    }

    /// `{x : a·x <= b, e·x = f}` from rows `(a, b)` and `(e, f)`.
    pub fn from_h(dim: usize, ineq: &[(Vec<Q>, Q)], eq: &[(Vec<Q>, Q)]) -> Result<Self> {
        let mut rows = Vec::with_capacity(ineq.len() + 1);
        for (a, b) in ineq {
            if a.len() != dim {
                return Err(Error::dim("polyhedron inequality row", dim, a.len()));
            }
            let mut r = a.clone();
            r.push(-b);
            rows.push(r);
        }
        let mut t = zeros(dim + 1);
        t[dim] = -Q::one();
        rows.push(t);
        let mut eqs = Vec::with_capacity(eq.len());
        for (e, f) in eq {
            if e.len() != dim {
                return Err(Error::dim("polyhedron equality row", dim, e.len()));
            }
            let mut r = e.clone();
            r.push(-f);
            eqs.push(r);
        }
        Ok(Polyhedron::from_hom(
            dim,
            PolyCone::from_h(dim + 1, &rows, &eqs)?,
        ))
    }

    /// Convex hull of `points` plus the cone of `rays` plus the span of `lineality`.
    pub fn from_v(
        dim: usize,
        points: &[Vec<Q>],
        rays: &[Vec<Q>],
        lineality: &[Vec<Q>],
    ) -> Result<Self> {
        check_dims("polyhedron point", dim, points)?;
        check_dims("polyhedron ray", dim, rays)?;
        check_dims("polyhedron lineality vector", dim, lineality)?;
        if points.is_empty() {
            return Ok(Polyhedron::empty(dim));
        }
        let h = |v: &Vec<Q>, t: i64| {
            let mut r = v.clone();
            r.push(q(t));
            r
        };
        let gens: Vec<Vec<Q>> = points
            .iter()
            .map(|p| h(p, 1))
            .chain(rays.iter().map(|r| h(r, 0)))
            .collect();
        let lin: Vec<Vec<Q>> = lineality.iter().map(|l| h(l, 0)).collect();
        Ok(Polyhedron::from_hom(
            dim,
            PolyCone::from_v(dim + 1, &gens, &lin)?,
        ))
    }

    pub fn empty(dim: usize) -> Self {
        Polyhedron {
            dim,
            empty: true,
            hom: PolyCone::zero(dim + 1),
        }
    }

    pub fn universe(dim: usize) -> Self {
        Polyhedron::from_h(dim, &[], &[]).expect("consistent dims")
    }

    pub fn point(x: &[Q]) -> Self {
        Polyhedron::from_v(x.len(), &[x.to_vec()], &[], &[]).expect("consistent dims")
    }

    pub fn from_cone(k: &PolyCone) -> Self {
        let t = |v: &Vec<Q>| concat(v, &[Q::zero()]);
        let mut rays: Vec<Vec<Q>> = k.rays.iter().map(t).collect();
        rays.push(unit(k.dim + 1, k.dim));
        let lin: Vec<Vec<Q>> = k.lineality.iter().map(t).collect();
        let hom = PolyCone::from_v(k.dim + 1, &rays, &lin).expect("consistent dims");
        Polyhedron {
            dim: k.dim,
            empty: false,
            hom,
        }
    }

    /// The cone this polyhedron equals, if it is one.
    pub fn as_cone(&self) -> Option<PolyCone> {
        if self.empty || self.vertices().iter().any(|v| !is_zero_vec(v)) {
            return None;
        }
        Some(PolyCone::from_v(self.dim, &self.rays(), &self.lineality()).expect("consistent dims"))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn homogenization(&self) -> &PolyCone {
        &self.hom
    }

    /// Irredundant inequalities `(a, b)` meaning `a·x <= b`.
    pub fn ineq(&self) -> Vec<(Vec<Q>, Q)> {
        if self.empty {
            return vec![(zeros(self.dim), -Q::one())];
        }
        self.hom
            .ineq
            .iter()
            .filter(|r| !is_zero_vec(&r[..self.dim]))
            .map(|r| (r[..self.dim].to_vec(), -r[self.dim].clone()))
            .collect()
    }

    /// Equalities `(e, f)` meaning `e·x = f`, in reduced echelon form.
    pub fn eq(&self) -> Vec<(Vec<Q>, Q)> {
        if self.empty {
            return Vec::new();
        }
        self.hom
            .eq
            .iter()
            .map(|r| (r[..self.dim].to_vec(), -r[self.dim].clone()))
            .collect()
    }

    /// One point per minimal face.
    pub fn vertices(&self) -> Vec<Vec<Q>> {
        self.hom
            .rays
            .iter()
            .filter(|r| r[self.dim].is_positive())
            .map(|r| scale(&r[..self.dim], &r[self.dim].recip()))
            .collect()
    }

    /// Extreme rays of the recession cone.
    pub fn rays(&self) -> Vec<Vec<Q>> {
        if self.empty {
            return Vec::new();
        }
        self.hom
            .rays
            .iter()
            .filter(|r| r[self.dim].is_zero())
            .map(|r| r[..self.dim].to_vec())
            .collect()
    }

    pub fn lineality(&self) -> Vec<Vec<Q>> {
        if self.empty {
            return Vec::new();
        }
        self.hom
            .lineality
            .iter()
            .map(|r| r[..self.dim].to_vec())
            .collect()
    }

    pub fn recession_cone(&self) -> PolyCone {
        PolyCone::from_v(self.dim, &self.rays(), &self.lineality()).expect("consistent dims")
    }

    pub fn is_bounded(&self) -> bool {
        self.empty
            || self.hom.rays.iter().all(|r| r[self.dim].is_positive())
                && self.hom.lineality.is_empty()
    }

    /// Dimension of the affine hull, `-1` for the empty set.
    pub fn affine_dim(&self) -> isize {
        if self.empty {
            -1
        } else {
            self.hom.span_dim() as isize - 1
        }
    }

    pub fn contains(&self, x: &[Q]) -> bool {
        !self.empty && x.len() == self.dim && self.hom.contains(&concat(x, &[Q::one()]))
    }

    pub fn contains_relint(&self, x: &[Q]) -> bool {
        !self.empty && x.len() == self.dim && {
            let p = concat(x, &[Q::one()]);
            self.hom.eq.iter().all(|e| dot(e, &p).is_zero())
                && self
                    .hom
                    .ineq
                    .iter()
                    .filter(|r| !is_zero_vec(&r[..self.dim]))
                    .all(|a| dot(a, &p).is_negative())
        }
    }

    pub fn contains_poly(&self, other: &Polyhedron) -> bool {
        other.empty || (!self.empty && self.hom.contains_cone(&other.hom))
    }

    pub fn intersect(&self, other: &Polyhedron) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::dim("polyhedron intersection", self.dim, other.dim));
        }
        if self.empty || other.empty {
            return Ok(Polyhedron::empty(self.dim));
        }
        Ok(Polyhedron::from_hom(
            self.dim,
            self.hom.intersect(&other.hom)?,
        ))
    }

    /// Adds constraints to the H-representation.
    pub fn with_constraints(&self, ineq: &[(Vec<Q>, Q)], eq: &[(Vec<Q>, Q)]) -> Result<Self> {
        let mut i = self.ineq();
        i.extend_from_slice(ineq);
        let mut e = self.eq();
        e.extend_from_slice(eq);
        Polyhedron::from_h(self.dim, &i, &e)
    }

    /// `{M x + c : x in P}` for a `k × dim` matrix `M`.
    pub fn affine_image(&self, m: &[Vec<Q>], c: &[Q]) -> Result<Self> {
        check_dims("image matrix row", self.dim, m)?;
        if c.len() != m.len() {
            return Err(Error::dim("image offset", m.len(), c.len()));
        }
        let k = m.len();
        if self.empty {
            return Ok(Polyhedron::empty(k));
        }
        let map = |v: &Vec<Q>| {
            let mut out = add(&mat_vec(m, &v[..self.dim]), &scale(c, &v[self.dim]));
            out.push(v[self.dim].clone());
            out
        };
        let rays: Vec<Vec<Q>> = self.hom.rays.iter().map(map).collect();
        let lin: Vec<Vec<Q>> = self.hom.lineality.iter().map(map).collect();
        Ok(Polyhedron::from_hom(
            k,
            PolyCone::from_v(k + 1, &rays, &lin)?,
        ))
    }

    pub fn linear_image(&self, m: &[Vec<Q>]) -> Result<Self> {
        self.affine_image(m, &zeros(m.len()))
    }

    /// `{x in Q^n : M x + c in P}` for a `dim × n` matrix `M`.
    pub fn affine_preimage(&self, m: &[Vec<Q>], c: &[Q], n: usize) -> Result<Self> {
        if m.len() != self.dim {
            return Err(Error::dim("preimage matrix rows", self.dim, m.len()));
        }
        check_dims("preimage matrix row", n, m)?;
        if self.empty {
            return Ok(Polyhedron::empty(n));
        }
        let tr = |(a, b): (Vec<Q>, Q)| {
            let row = vec_mat(&a, m, n);
            let rhs = b - dot(&a, c);
            (row, rhs)
        };
        let ineq: Vec<(Vec<Q>, Q)> = self.ineq().into_iter().map(tr).collect();
        let eq: Vec<(Vec<Q>, Q)> = self.eq().into_iter().map(tr).collect();
        Polyhedron::from_h(n, &ineq, &eq)
    }

    pub fn linear_preimage(&self, m: &[Vec<Q>], n: usize) -> Result<Self> {
        self.affine_preimage(m, &zeros(self.dim), n)
    }

    pub fn translate(&self, v: &[Q]) -> Result<Self> {
        self.affine_image(&super::linalg::identity(self.dim), v)
    }

    /// Cartesian product `P × R`.
    pub fn product(&self, other: &Polyhedron) -> Self {
        let d = self.dim + other.dim;
        if self.empty || other.empty {
            return Polyhedron::empty(d);
        }
        let left = |(a, b): (Vec<Q>, Q)| (concat(&a, &zeros(other.dim)), b);
        let right = |(a, b): (Vec<Q>, Q)| (concat(&zeros(self.dim), &a), b);
        let ineq: Vec<_> = self
            .ineq()
            .into_iter()
            .map(left)
            .chain(other.ineq().into_iter().map(right))
            .collect();
        let eq: Vec<_> = self
            .eq()
            .into_iter()
            .map(left)
            .chain(other.eq().into_iter().map(right))
            .collect();
        Polyhedron::from_h(d, &ineq, &eq).expect("consistent dims")
    }

    pub fn minkowski_sum(&self, other: &Polyhedron) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::dim("Minkowski sum", self.dim, other.dim));
        }
        let n = self.dim;
        let m: Vec<Vec<Q>> = (0..n).map(|i| concat(&unit(n, i), &unit(n, i))).collect();
        self.product(other).linear_image(&m)
    }

    /// A point in the relative interior.
    pub fn relint_point(&self) -> Option<Vec<Q>> {
        if self.empty {
            return None;
        }
        let w = self.hom.relint_point();
        Some(scale(&w[..self.dim], &w[self.dim].recip()))
    }

    /// Tangent cone at a point of `P`.
    pub fn tangent_cone(&self, x: &[Q]) -> Result<PolyCone> {
        if !self.contains(x) {
            return Err(Error::pre("point is not in the polyhedron"));
        }
        let active: Vec<Vec<Q>> = self
            .ineq()
            .into_iter()
            .filter(|(a, b)| &dot(a, x) == b)
            .map(|(a, _)| a)
            .collect();
        let eq: Vec<Vec<Q>> = self.eq().into_iter().map(|(e, _)| e).collect();
        PolyCone::from_h(self.dim, &active, &eq)
    }

    /// Normal cone at a point of `P`.
    pub fn normal_cone(&self, x: &[Q]) -> Result<PolyCone> {
        Ok(self.tangent_cone(x)?.polar())
    }

    /// All nonempty faces with relative interior witnesses; the first is `P` itself.
    pub fn faces(&self) -> Vec<PolyhedronFace> {
        if self.empty {
            return Vec::new();
        }
        self.hom
            .faces()
            .into_iter()
            .filter(|f| f.witness[self.dim].is_positive())
            .map(|f| PolyhedronFace {
                witness: scale(&f.witness[..self.dim], &f.witness[self.dim].recip()),
                poly: Polyhedron {
                    dim: self.dim,
                    empty: false,
                    hom: f.cone,
                },
            })
            .collect()
    }

    /// Euclidean projection of `p`, computed exactly by projecting onto the affine hull of each face.
    pub fn project(&self, p: &[Q]) -> Option<Vec<Q>> {
        if self.empty {
            return None;
        }
        if self.contains(p) {
            return Some(p.to_vec());
        }
        let mut best: Option<(Q, Vec<Q>)> = None;
        for f in self.faces() {
            let x = project_affine(&f.poly.eq(), p);
            if !self.contains(&x) {
                continue;
            }
            let d = norm_sq(&sub(&x, p));
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, x));
            }
        }
        best.map(|(_, x)| x)
    }

    pub fn dist_sq(&self, p: &[Q]) -> Option<Q> {
        self.project(p).map(|x| norm_sq(&sub(&x, p)))
    }
}

/// Projection onto `{x : e·x = f}` for independent rows.
fn project_affine(eq: &[(Vec<Q>, Q)], p: &[Q]) -> Vec<Q> {
    if eq.is_empty() {
        return p.to_vec();
    }
    let e: Vec<Vec<Q>> = eq.iter().map(|(e, _)| e.clone()).collect();
    let r: Vec<Q> = eq.iter().map(|(e, f)| dot(e, p) - f).collect();
    let gram: Vec<Vec<Q>> = e
        .iter()
        .map(|a| e.iter().map(|b| dot(a, b)).collect())
        .collect();
    let inv = inverse(&gram).expect("independent equality rows");
    let mu = mat_vec(&inv, &r);
    let et = transpose(&e, p.len());
    sub(p, &mat_vec(&et, &mu))
}
