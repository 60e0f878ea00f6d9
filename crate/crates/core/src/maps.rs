//! Polyhedral set-valued maps and their generalized derivatives.

use num_traits::{Signed, Zero};

use crate::cones::{ConeUnion, PolySet};
use crate::error::{Error, Result};
use crate::geometry::linalg::{inverse, mat_mul, rank, transpose};
use crate::geometry::*;

/// Set-valued map `S : Q^m ⇉ Q^n` whose graph `{(y, x) : x ∈ S(y)}` is a finite union of polyhedra.
#[derive(Clone, Debug)]
pub struct PolyMap {
    m: usize,
    n: usize,
    graph: PolySet,
}

/// Selector matrix for the coordinates `offset..offset+len` of a vector of length `total`.
pub(crate) fn block_selector(total: usize, offset: usize, len: usize) -> Vec<Vec<Q>> {
    (0..len).map(|i| unit(total, offset + i)).collect()
}

/// `{w : (fixed, w) ∈ P}` (`fixed_first`) or `{w : (w, fixed) ∈ P}` for a set in `Q^{a+b}`.
pub(crate) fn slice(set: &PolySet, fixed: &[Q], fixed_first: bool) -> PolySet {
    let total = set.dim();
    let k = fixed.len();
    let free = total - k;
    let (m, c): (Vec<Vec<Q>>, Vec<Q>) = if fixed_first {
        let m = (0..total)
            .map(|i| {
                if i < k {
                    zeros(free)
                } else {
                    unit(free, i - k)
                }
            })
            .collect();
        (m, concat(fixed, &zeros(free)))
    } else {
        let m = (0..total)
            .map(|i| if i < free { unit(free, i) } else { zeros(free) })
            .collect();
        (m, concat(&zeros(free), fixed))
    };
    set.affine_preimage(&m, &c, free).expect("consistent dims")
}

impl PolyMap {
    pub fn new(m: usize, n: usize, graph: PolySet) -> Result<Self> {
        if graph.dim() != m + n {
            return Err(Error::dim("map graph", m + n, graph.dim()));
        }
        Ok(PolyMap { m, n, graph })
    }

    pub fn from_components(m: usize, n: usize, comps: Vec<Polyhedron>) -> Result<Self> {
        PolyMap::new(m, n, PolySet::new(m + n, comps)?)
    }

    /// `y ↦ {M y + c}`.
    pub fn affine(mat: &[Vec<Q>], c: &[Q], m: usize) -> Result<Self> {
        let n = mat.len();
        let eq: Vec<(Vec<Q>, Q)> = mat
            .iter()
            .zip(c)
            .enumerate()
            .map(|(i, (row, ci))| (concat(&neg(row), &unit(n, i)), ci.clone()))
            .collect();
        PolyMap::from_components(m, n, vec![Polyhedron::from_h(m + n, &[], &eq)?])
    }

    pub fn identity(n: usize) -> Self {
        PolyMap::affine(&linalg::identity(n), &zeros(n), n).expect("consistent dims")
    }

    pub fn in_dim(&self) -> usize {
        self.m
    }
    pub fn out_dim(&self) -> usize {
        self.n
    }
    pub fn graph(&self) -> &PolySet {
        &self.graph
    }

    pub fn in_graph(&self, y: &[Q], x: &[Q]) -> bool {
        self.graph.contains(&concat(y, x))
    }

    pub fn domain(&self) -> PolySet {
        self.graph
            .linear_image(&block_selector(self.m + self.n, 0, self.m))
            .expect("consistent dims")
    }

    pub fn range(&self) -> PolySet {
        self.graph
            .linear_image(&block_selector(self.m + self.n, self.m, self.n))
            .expect("consistent dims")
    }

    /// `S(y)` as a union of polyhedra.
    pub fn eval(&self, y: &[Q]) -> PolySet {
        slice(&self.graph, y, true)
    }

    pub fn inverse(&self) -> PolyMap {
        let total = self.m + self.n;
        let swap: Vec<Vec<Q>> = (0..total)
            .map(|i| {
                if i < self.n {
                    unit(total, self.m + i)
                } else {
                    unit(total, i - self.n)
                }
            })
            .collect();
        PolyMap {
            m: self.n,
            n: self.m,
            graph: self.graph.linear_image(&swap).expect("consistent dims"),
        }
    }

    fn check_base(&self, y: &[Q], x: &[Q]) -> Result<Vec<Q>> {
        if y.len() != self.m || x.len() != self.n {
            return Err(Error::dim(
                "graph point",
                self.m + self.n,
                y.len() + x.len(),
            ));
        }
        let p = concat(y, x);
        if !self.graph.contains(&p) {
            return Err(Error::pre("base point is not on the graph"));
        }
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DerivativeKind {
    Graphical,
    RegularCoderivative,
    LimitingCoderivative,
    /// Directional limiting coderivative in direction `(u, v)` of the graph.
    DirectionalCoderivative {
        u: Vec<Q>,
        v: Vec<Q>,
    },
}

impl DerivativeKind {
    pub fn name(&self) -> &'static str {
        match self {
            DerivativeKind::Graphical => "graphical-derivative",
            DerivativeKind::RegularCoderivative => "regular-coderivative",
            DerivativeKind::LimitingCoderivative => "limiting-coderivative",
            DerivativeKind::DirectionalCoderivative { .. } => "directional-limiting-coderivative",
        }
    }
}

/// A derivative of a polyhedral map at a graph point, held as a union of cones in `Q^m × Q^n`.
#[derive(Clone, Debug)]
pub struct DerivativeObject {
    pub y: Vec<Q>,
    pub x: Vec<Q>,
    pub kind: DerivativeKind,
    pub value: ConeUnion,
    m: usize,
}

impl DerivativeObject {
    /// Graphical derivative: `DS(u) = {v : (u, v) ∈ T}`.
    /// Coderivatives: `D*S(v*) = {u* : (u*, −v*) ∈ N}`.
    pub fn apply(&self, arg: &[Q]) -> PolySet {
        let set = self.value.to_polyset();
        match self.kind {
            DerivativeKind::Graphical => slice(&set, arg, true),
            _ => slice(&set, &neg(arg), false),
        }
    }

    pub fn maps_to(&self, arg: &[Q], val: &[Q]) -> bool {
        match self.kind {
            DerivativeKind::Graphical => self.value.contains(&concat(arg, val)),
            _ => self.value.contains(&concat(val, &neg(arg))),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.m
    }
}

pub fn graphical_derivative(s: &PolyMap, y: &[Q], x: &[Q]) -> Result<DerivativeObject> {
    let p = s.check_base(y, x)?;
    Ok(DerivativeObject {
        y: y.to_vec(),
        x: x.to_vec(),
        kind: DerivativeKind::Graphical,
        value: s.graph.tangent_cone(&p),
        m: s.m,
    })
}

pub fn coderivative(
    s: &PolyMap,
    y: &[Q],
    x: &[Q],
    kind: DerivativeKind,
) -> Result<DerivativeObject> {
    let p = s.check_base(y, x)?;
    let value = match &kind {
        DerivativeKind::Graphical => return graphical_derivative(s, y, x),
        DerivativeKind::RegularCoderivative => ConeUnion::convex(
            s.graph
                .regular_normal_cone(&p)
                .expect("base point on graph"),
        ),
        DerivativeKind::LimitingCoderivative => s.graph.limiting_normal_cone(&p),
        DerivativeKind::DirectionalCoderivative { u, v } => {
            if u.len() != s.m || v.len() != s.n {
                return Err(Error::dim(
                    "coderivative direction",
                    s.m + s.n,
                    u.len() + v.len(),
                ));
            }
            s.graph.directional_limiting_normal_cone(&p, &concat(u, v))
        }
    };
    Ok(DerivativeObject {
        y: y.to_vec(),
        x: x.to_vec(),
        kind,
        value,
        m: s.m,
    })
}

/// Lipschitz certificate of one convex graph component.
#[derive(Clone, Debug)]
pub struct HoffmanCertificate {
    pub component: usize,
    /// Rational upper bound on `max_J ‖B_J^†‖₂ · ‖A‖₂` over independent row subsets `J`.
    pub kappa: Q,
    /// Maximizing rows, as indices into the component's inequality list
    /// (equalities contribute a pair of opposite rows at the end).
    pub rows: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct CalmnessBound {
    pub kappa: Q,
    pub certificates: Vec<HoffmanCertificate>,
}

/// Upper bound on `‖M‖₂²`.
fn spectral_sq_bound(mat: &[Vec<Q>]) -> Q {
    let frob: Q = mat.iter().flatten().map(|x| x * x).sum();
    let rows = mat.len();
    let cols = mat.first().map_or(0, Vec::len);
    if rows <= 1 || cols <= 1 {
        return frob;
    }
    let inf = mat.iter().map(|r| l1_norm(r)).max().unwrap_or_else(Q::zero);
    let one = (0..cols)
        .map(|j| mat.iter().fold(Q::zero(), |acc, r| acc + r[j].abs()))
        .max()
        .unwrap_or_else(Q::zero);
    frob.min(inf * one)
}

fn component_kappa(p: &Polyhedron, m: usize, n: usize) -> (Q, Vec<usize>) {
    let mut rows: Vec<Vec<Q>> = p.ineq().into_iter().map(|(a, _)| a).collect();
    let eq: Vec<Vec<Q>> = p.eq().into_iter().map(|(e, _)| e).collect();
    // Rows without an x-part are inactive at ȳ ∈ dom; a pair ±e has at most one positive residual.
    let a_rows: Vec<Vec<Q>> = rows
        .iter()
        .chain(&eq)
        .filter(|r| r[m..].iter().any(|x| !x.is_zero()))
        .map(|r| r[..m].to_vec())
        .collect();
    for e in eq {
        rows.push(neg(&e));
        rows.push(e);
    }
    // Hoffman: dist(x, S(ȳ)) ≤ H ‖residual₊‖ with H² = max_J λ_max((B_J B_Jᵀ)^{-1}).
    let mut best = (Q::zero(), Vec::new());
    let mut stack: Vec<Vec<usize>> = vec![Vec::new()];
    while let Some(set) = stack.pop() {
        let start = set.last().map_or(0, |l| l + 1);
        for i in start..rows.len() {
            let mut j = set.clone();
            j.push(i);
            let bj: Vec<Vec<Q>> = j.iter().map(|&r| rows[r][m..].to_vec()).collect();
            if rank(&bj, n) < j.len() {
                continue;
            }
            let gram = mat_mul(&bj, &transpose(&bj, n), j.len());
            let ginv = inverse(&gram).expect("independent rows");
            let trace: Q = (0..j.len()).map(|d| ginv[d][d].clone()).sum();
            let row_sum = ginv
                .iter()
                .map(|r| l1_norm(r))
                .max()
                .unwrap_or_else(Q::zero);
            let h2 = trace.min(row_sum);
            if h2 > best.0 {
                best = (h2, j.clone());
            }
            if j.len() < n {
                stack.push(j);
            }
        }
    }
    let k2 = best.0 * spectral_sq_bound(&a_rows);
    let (_, hi) = sqrt_bounds(&k2, 32);
    (hi, best.1)
}

/// A constant `κ` valid for calmness and inner calmness* of `S` at every point of its domain.
pub fn calmness_bound(s: &PolyMap, ybar: &[Q]) -> Result<CalmnessBound> {
    if ybar.len() != s.m {
        return Err(Error::dim("calmness base point", s.m, ybar.len()));
    }
    if !s.domain().contains(ybar) {
        return Err(Error::pre("base point is not in the domain"));
    }
    let certificates: Vec<HoffmanCertificate> = s
        .graph
        .components()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (kappa, rows) = component_kappa(p, s.m, s.n);
            HoffmanCertificate {
                component: i,
                kappa,
                rows,
            }
        })
        .collect();
    let kappa = certificates
        .iter()
        .map(|c| c.kappa.clone())
        .max()
        .unwrap_or_else(Q::zero);
    Ok(CalmnessBound {
        kappa,
        certificates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::normal_cone_graph;

    fn n_rminus() -> PolyMap {
        let d = Polyhedron::from_h(1, &[(qvec(&[1]), q(0))], &[]).unwrap();
        PolyMap::new(1, 1, normal_cone_graph(&d)).unwrap()
    }

    fn step() -> PolyMap {
        let lo = Polyhedron::from_h(2, &[(qvec(&[1, 0]), q(0))], &[(qvec(&[0, 1]), q(0))]).unwrap();
        let hi =
            Polyhedron::from_h(2, &[(qvec(&[-1, 0]), q(0))], &[(qvec(&[0, 1]), q(1))]).unwrap();
        PolyMap::from_components(1, 1, vec![lo, hi]).unwrap()
    }

    #[test]
    fn derivative_of_normal_cone_map() {
        let d = graphical_derivative(&n_rminus(), &qvec(&[0]), &qvec(&[0])).unwrap();
        let at = |u: i64| d.apply(&qvec(&[u]));
        assert!(at(-1).set_eq(&PolySet::convex(Polyhedron::point(&qvec(&[0])))));
        assert!(
            at(0).set_eq(&PolySet::convex(Polyhedron::from_cone(&PolyCone::orthant(
                1
            ))))
        );
        assert!(at(1).is_empty());
    }

    #[test]
    fn identity_derivatives() {
        let id = PolyMap::identity(2);
        let y = qvec(&[3, -1]);
        let g = graphical_derivative(&id, &y, &y).unwrap();
        assert!(g
            .apply(&qvec(&[1, 2]))
            .set_eq(&PolySet::convex(Polyhedron::point(&qvec(&[1, 2])))));
        for kind in [
            DerivativeKind::RegularCoderivative,
            DerivativeKind::LimitingCoderivative,
        ] {
            let c = coderivative(&id, &y, &y, kind).unwrap();
            assert!(c
                .apply(&qvec(&[2, 5]))
                .set_eq(&PolySet::convex(Polyhedron::point(&qvec(&[2, 5])))));
        }
    }

    #[test]
    fn coderivative_examples() {
        let s = n_rminus();
        let o = qvec(&[0]);
        let c = coderivative(&s, &o, &o, DerivativeKind::LimitingCoderivative).unwrap();
        assert!(c.maps_to(&qvec(&[-1]), &qvec(&[0])));
        let off = DerivativeKind::DirectionalCoderivative {
            u: qvec(&[1]),
            v: qvec(&[1]),
        };
        assert!(coderivative(&s, &o, &o, off).unwrap().value.is_empty());
        let zero = DerivativeKind::DirectionalCoderivative {
            u: qvec(&[0]),
            v: qvec(&[0]),
        };
        assert!(coderivative(&s, &o, &o, zero)
            .unwrap()
            .value
            .set_eq(&c.value));
    }

    #[test]
    fn calmness_constants() {
        let below = PolyMap::from_components(
            1,
            1,
            vec![Polyhedron::from_h(2, &[(qvec(&[-1, 1]), q(0))], &[]).unwrap()],
        )
        .unwrap();
        assert_eq!(calmness_bound(&below, &qvec(&[0])).unwrap().kappa, q(1));
        let double = PolyMap::affine(&[qvec(&[2])], &qvec(&[0]), 1).unwrap();
        assert_eq!(calmness_bound(&double, &qvec(&[5])).unwrap().kappa, q(2));
        assert_eq!(calmness_bound(&step(), &qvec(&[0])).unwrap().kappa, q(0));
        let e = PolyMap::from_components(1, 1, vec![Polyhedron::point(&qvec(&[1, 0]))]).unwrap();
        assert!(calmness_bound(&e, &qvec(&[0])).is_err());
    }

    #[test]
    fn inverse_swaps_graph() {
        let double = PolyMap::affine(&[qvec(&[2])], &qvec(&[0]), 1).unwrap();
        let inv = double.inverse();
        assert!(inv.in_graph(&qvec(&[2]), &qvec(&[1])));
        assert!(step()
            .domain()
            .set_eq(&PolySet::convex(Polyhedron::universe(1))));
    }
}
