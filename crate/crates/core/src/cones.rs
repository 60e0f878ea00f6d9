//! Finite unions of polyhedra and their variational cones.

use num_traits::{Signed, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::*;

/// Finite union of convex polyhedra in a common space. Components are nonempty,
/// pairwise non-nested and sorted. An empty component list is the empty set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PolySet {
    dim: usize,
    components: Vec<Polyhedron>,
}

/// Finite union of polyhedral cones; empty means the empty set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConeUnion {
    dim: usize,
    components: Vec<PolyCone>,
}

fn prune<T: Clone + Ord>(mut items: Vec<T>, contains: impl Fn(&T, &T) -> bool) -> Vec<T> {
    items.sort();
    items.dedup();
    let keep: Vec<bool> = (0..items.len())
        .map(|i| {
            !(0..items.len()).any(|j| {
                j != i
                    && contains(&items[j], &items[i])
                    && (j < i || !contains(&items[i], &items[j]))
            })
        })
        .collect();
    items
        .into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(x, _)| x)
        .collect()
}

/// Hyperplanes `(h, c)` from the rows of the given polyhedra, normalized and deduplicated.
fn hyperplanes_of<'a>(polys: impl Iterator<Item = &'a Polyhedron>) -> Vec<(Vec<Q>, Q)> {
    let mut hs: Vec<(Vec<Q>, Q)> = Vec::new();
    for p in polys {
        for (a, b) in p.ineq().into_iter().chain(p.eq()) {
            let mut v = a.clone();
            v.push(b);
            let mut prim = int_to_q(&primitive(&v));
            if prim
                .iter()
                .find(|x| !x.is_zero())
                .is_some_and(|x| x.is_negative())
            {
                prim = neg(&prim);
            }
            let c = prim.pop().expect("nonempty row");
            if !is_zero_vec(&prim) {
                hs.push((prim, c));
            }
        }
    }
    hs.sort();
    hs.dedup();
    hs
}

/// A point of `∪a` outside `∪b`, or `None` when `∪a ⊆ ∪b`.
pub fn union_difference_witness(a: &[Polyhedron], b: &[Polyhedron]) -> Option<Vec<Q>> {
    a.par_iter()
        .find_map_any(|p| component_difference_witness(p, b))
}

fn component_difference_witness(p: &Polyhedron, b: &[Polyhedron]) -> Option<Vec<Q>> {
    if p.is_empty() || b.iter().any(|q| q.contains_poly(p)) {
        return None;
    }
    let w = p.relint_point().expect("nonempty");
    if !b.iter().any(|q| q.contains(&w)) {
        return Some(w);
    }
    let relevant: Vec<&Polyhedron> = b
        .iter()
        .filter(|q| !q.intersect(p).expect("same dim").is_empty())
        .collect();
    let hs = hyperplanes_of(relevant.iter().copied());
    cells(p, &hs)
        .into_iter()
        .map(|c| c.witness)
        .find(|w| !relevant.iter().any(|q| q.contains(w)))
}

impl PolySet {
    pub fn new(dim: usize, components: Vec<Polyhedron>) -> Result<Self> {
        for c in &components {
            if c.dim() != dim {
                return Err(Error::dim("union component", dim, c.dim()));
            }
        }
        let comps = components.into_iter().filter(|c| !c.is_empty()).collect();
        Ok(PolySet {
            dim,
            components: prune(comps, |a, b| a.contains_poly(b)),
        })
    }

    pub fn empty(dim: usize) -> Self {
        PolySet {
            dim,
            components: Vec::new(),
        }
    }

    pub fn convex(p: Polyhedron) -> Self {
        let dim = p.dim();
        PolySet::new(dim, vec![p]).expect("single component")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Polyhedron] {
        &self.components
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn is_convex(&self) -> bool {
        self.components.len() <= 1
    }

    pub fn contains(&self, x: &[Q]) -> bool {
        self.components.iter().any(|c| c.contains(x))
    }

    pub fn is_subset_of(&self, other: &PolySet) -> bool {
        self.dim == other.dim
            && union_difference_witness(&self.components, &other.components).is_none()
    }

    /// Exact set equality by mutual inclusion.
    pub fn set_eq(&self, other: &PolySet) -> bool {
        self.is_subset_of(other) && other.is_subset_of(self)
    }

    pub fn union(&self, other: &PolySet) -> Result<PolySet> {
        let comps = self
            .components
            .iter()
            .chain(&other.components)
            .cloned()
            .collect();
        PolySet::new(self.dim, comps)
    }

    pub fn intersect(&self, other: &PolySet) -> Result<PolySet> {
        let mut comps = Vec::new();
        for a in &self.components {
            for b in &other.components {
                comps.push(a.intersect(b)?);
            }
        }
        PolySet::new(self.dim, comps)
    }

    pub fn intersect_poly(&self, p: &Polyhedron) -> Result<PolySet> {
        self.intersect(&PolySet::convex(p.clone()))
    }

    pub fn product(&self, other: &PolySet) -> PolySet {
        let comps = self
            .components
            .iter()
            .flat_map(|a| other.components.iter().map(move |b| a.product(b)))
            .collect();
        PolySet::new(self.dim + other.dim, comps).expect("consistent dims")
    }

    pub fn affine_image(&self, m: &[Vec<Q>], c: &[Q]) -> Result<PolySet> {
        let comps = self
            .components
            .iter()
            .map(|p| p.affine_image(m, c))
            .collect::<Result<Vec<_>>>()?;
        PolySet::new(m.len(), comps)
    }

    pub fn linear_image(&self, m: &[Vec<Q>]) -> Result<PolySet> {
        self.affine_image(m, &zeros(m.len()))
    }

    pub fn affine_preimage(&self, m: &[Vec<Q>], c: &[Q], n: usize) -> Result<PolySet> {
        let comps = self
            .components
            .iter()
            .map(|p| p.affine_preimage(m, c, n))
            .collect::<Result<Vec<_>>>()?;
        PolySet::new(n, comps)
    }

    /// Radius `ρ > 0` with `Ω ∩ B(x,ρ) = (x + T_Ω(x)) ∩ B(x,ρ)`; `None` when the identity is global.
    pub fn local_conic_radius(&self, x: &[Q]) -> Option<Q> {
        let mut best: Option<Q> = None;
        let mut take = |r: Q| {
            if best.as_ref().is_none_or(|b| r < *b) {
                best = Some(r);
            }
        };
        for p in &self.components {
            if p.contains(x) {
                for (a, b) in p.ineq() {
                    let slack = &b - dot(&a, x);
                    if slack.is_positive() {
                        let (_, hi) = sqrt_bounds(&norm_sq(&a), 32);
                        take(slack / hi);
                    }
                }
            } else {
                let d2 = p.dist_sq(x).expect("nonempty component");
                let (lo, _) = sqrt_bounds(&d2, 32);
                take(lo);
            }
        }
        best
    }

    /// Bouligand tangent cone at `x`; empty when `x ∉ Ω`.
    pub fn tangent_cone(&self, x: &[Q]) -> ConeUnion {
        let comps = self
            .components
            .iter()
            .filter(|p| p.contains(x))
            .map(|p| p.tangent_cone(x).expect("contains x"))
            .collect();
        ConeUnion::new(self.dim, comps).expect("consistent dims")
    }

    /// Regular normal cone at `x`, `None` when `x ∉ Ω`.
    pub fn regular_normal_cone(&self, x: &[Q]) -> Option<PolyCone> {
        self.tangent_cone(x).polar()
    }

    /// Limiting normal cone at `x`; empty when `x ∉ Ω`.
    pub fn limiting_normal_cone(&self, x: &[Q]) -> ConeUnion {
        self.tangent_cone(x).limiting_normal_at_origin()
    }

    /// Directional limiting normal cone at `x` in direction `u`.
    pub fn directional_limiting_normal_cone(&self, x: &[Q], u: &[Q]) -> ConeUnion {
        let t = self.tangent_cone(x);
        if !t.contains(u) {
            return ConeUnion::empty(self.dim);
        }
        t.limiting_normal_cone(u)
    }

    /// Componentwise `ineq`/`eq` rows, useful for reports.
    pub fn into_components(self) -> Vec<Polyhedron> {
        self.components
    }
}

impl ConeUnion {
    pub fn new(dim: usize, components: Vec<PolyCone>) -> Result<Self> {
        for c in &components {
            if c.dim() != dim {
                return Err(Error::dim("cone union component", dim, c.dim()));
            }
        }
        Ok(ConeUnion {
            dim,
            components: prune(components, |a, b| a.contains_cone(b)),
        })
    }

    pub fn empty(dim: usize) -> Self {
        ConeUnion {
            dim,
            components: Vec::new(),
        }
    }

    pub fn convex(k: PolyCone) -> Self {
        ConeUnion {
            dim: k.dim(),
            components: vec![k],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[PolyCone] {
        &self.components
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn contains(&self, x: &[Q]) -> bool {
        self.components.iter().any(|c| c.contains(x))
    }

    pub fn to_polyset(&self) -> PolySet {
        PolySet {
            dim: self.dim,
            components: self.components.iter().map(Polyhedron::from_cone).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &ConeUnion) -> bool {
        if self.dim != other.dim {
            return false;
        }
        if self
            .components
            .iter()
            .all(|a| other.components.iter().any(|b| b.contains_cone(a)))
        {
            return true;
        }
        self.to_polyset().is_subset_of(&other.to_polyset())
    }

    pub fn set_eq(&self, other: &ConeUnion) -> bool {
        self.is_subset_of(other) && other.is_subset_of(self)
    }

    pub fn union(&self, other: &ConeUnion) -> Result<ConeUnion> {
        let comps = self
            .components
            .iter()
            .chain(&other.components)
            .cloned()
            .collect();
        ConeUnion::new(self.dim, comps)
    }

    pub fn product(&self, other: &ConeUnion) -> ConeUnion {
        let comps = self
            .components
            .iter()
            .flat_map(|a| other.components.iter().map(move |b| a.product(b)))
            .collect();
        ConeUnion::new(self.dim + other.dim, comps).expect("consistent dims")
    }

    pub fn linear_image(&self, m: &[Vec<Q>]) -> Result<ConeUnion> {
        let comps = self
            .components
            .iter()
            .map(|k| k.linear_image(m))
            .collect::<Result<Vec<_>>>()?;
        ConeUnion::new(m.len(), comps)
    }

    pub fn linear_preimage(&self, m: &[Vec<Q>], n: usize) -> Result<ConeUnion> {
        let comps = self
            .components
            .iter()
            .map(|k| k.linear_preimage(m, n))
            .collect::<Result<Vec<_>>>()?;
        ConeUnion::new(n, comps)
    }

    /// Polar of the union: the intersection of the component polars. `None` for the empty union.
    pub fn polar(&self) -> Option<PolyCone> {
        let mut it = self.components.iter();
        let first = it.next()?.polar();
        Some(it.fold(first, |acc, k| acc.intersect(&k.polar()).expect("same dim")))
    }

    /// Tangent cone of the union at a point `x`.
    pub fn tangent_cone(&self, x: &[Q]) -> ConeUnion {
        let comps = self
            .components
            .iter()
            .filter(|k| k.contains(x))
            .map(|k| k.tangent_at(x).expect("contains x"))
            .collect();
        ConeUnion::new(self.dim, comps).expect("consistent dims")
    }

    /// Limiting normal cone of the union at `x`, using the conic model at `x`.
    pub fn limiting_normal_cone(&self, x: &[Q]) -> ConeUnion {
        self.tangent_cone(x).limiting_normal_at_origin()
    }

    /// Regular normal cone of the union at `x`.
    pub fn regular_normal_cone(&self, x: &[Q]) -> Option<PolyCone> {
        self.tangent_cone(x).polar()
    }

    /// `N_T(0)` for the cone union `T`: regular normals collected over the cells of the
    /// arrangement spanned by all component rows.
    pub fn limiting_normal_at_origin(&self) -> ConeUnion {
        match self.components.len() {
            0 => return ConeUnion::empty(self.dim),
            1 => return ConeUnion::convex(self.components[0].polar()),
            _ => {}
        }
        let polys: Vec<Polyhedron> = self.components.iter().map(Polyhedron::from_cone).collect();
        let hs = hyperplanes_of(polys.iter());
        let normals: Vec<PolyCone> = polys
            .par_iter()
            .flat_map_iter(|p| cells(p, &hs).into_iter().map(|c| c.witness))
            .map(|w| {
                self.regular_normal_cone(&w)
                    .expect("witness lies in the union")
            })
            .collect();
        ConeUnion::new(self.dim, normals).expect("consistent dims")
    }

    /// Directional limiting normal cone at the origin in direction `u`.
    pub fn directional_limiting_normal_cone(&self, u: &[Q]) -> ConeUnion {
        if !self.contains(u) {
            return ConeUnion::empty(self.dim);
        }
        self.limiting_normal_cone(u)
    }
}

/// `gph N_D` as a union over the faces `G` of `D` of `G × N_D(G)`.
pub fn normal_cone_graph(d: &Polyhedron) -> PolySet {
    let comps = d
        .faces()
        .into_iter()
        .map(|f| {
            let n = d.normal_cone(&f.witness).expect("witness in D");
            f.poly.product(&Polyhedron::from_cone(&n))
        })
        .collect();
    PolySet::new(2 * d.dim(), comps).expect("consistent dims")
}

/// `K_D(z, z*) = T_D(z) ∩ [z*]⊥`.
pub fn critical_cone(d: &Polyhedron, z: &[Q], zstar: &[Q]) -> Result<PolyCone> {
    if z.len() != d.dim() || zstar.len() != d.dim() {
        return Err(Error::dim(
            "critical cone point",
            d.dim(),
            z.len().max(zstar.len()),
        ));
    }
    if !d.contains(z) {
        return Err(Error::pre("z is not in D"));
    }
    let t = d.tangent_cone(z)?;
    if !t.polar().contains(zstar) {
        return Err(Error::pre("z* is not a normal to D at z"));
    }
    PolyCone::from_h(
        d.dim(),
        t.ineq(),
        &[t.eq().to_vec(), vec![zstar.to_vec()]].concat(),
    )
}

/// Local model of `gph N_D − (z, z*)` from the critical cone `K`.
#[derive(Clone, Debug)]
pub struct NormalGraphModel {
    pub critical_cone: PolyCone,
    /// `∪_F F × (K° ∩ F⊥)` over the faces `F` of `K`.
    pub model: PolySet,
    /// Radius of validity; `None` when the identity holds globally.
    pub radius: Option<Q>,
}

/// The complementarity set of the critical cone together with a radius on which it
/// coincides with the shifted graph of the normal cone map.
pub fn ncone_graph_local_model(d: &Polyhedron, z: &[Q], zstar: &[Q]) -> Result<NormalGraphModel> {
    let k = critical_cone(d, z, zstar)?;
    let kp = k.polar();
    let s = d.dim();
    let comps = k
        .faces()
        .into_iter()
        .map(|f| {
            let perp: Vec<Vec<Q>> = f
                .cone
                .rays()
                .iter()
                .chain(f.cone.lineality())
                .cloned()
                .collect();
            let g = kp.intersect(&PolyCone::from_h(s, &[], &perp)?)?;
            Ok(Polyhedron::from_cone(&f.cone.product(&g)))
        })
        .collect::<Result<Vec<_>>>()?;
    let model = PolySet::new(2 * s, comps)?;
    let radius = normal_cone_graph(d).local_conic_radius(&concat(z, zstar));
    Ok(NormalGraphModel {
        critical_cone: k,
        model,
        radius,
    })
}

/// The cone generated by a single integer vector.
pub fn ray(v: &[i64]) -> PolyCone {
    PolyCone::from_v(v.len(), &[qvec(v)], &[]).expect("consistent dims")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halfline(v: &[i64]) -> Polyhedron {
        Polyhedron::from_cone(&ray(v))
    }

    fn cross() -> PolySet {
        PolySet::new(2, vec![halfline(&[-1, 0]), halfline(&[0, -1])]).unwrap()
    }

    fn gph_n_rminus() -> PolySet {
        let d = Polyhedron::from_h(1, &[(qvec(&[1]), q(0))], &[]).unwrap();
        normal_cone_graph(&d)
    }

    fn cu(v: Vec<PolyCone>) -> ConeUnion {
        ConeUnion::new(v[0].dim(), v).unwrap()
    }

    #[test]
    fn tangent_of_union_at_origin() {
        let o = zeros(2);
        assert!(cross().tangent_cone(&o).to_polyset().set_eq(&cross()));
        let g = gph_n_rminus();
        assert!(g.tangent_cone(&o).to_polyset().set_eq(&g));
        let nonpos = PolyCone::orthant(2).polar();
        let quad = PolySet::convex(Polyhedron::from_cone(&nonpos));
        assert_eq!(quad.tangent_cone(&o).components(), &[nonpos]);
        assert!(quad.tangent_cone(&qvec(&[1, 0])).is_empty());
    }

    #[test]
    fn regular_normals() {
        let o = zeros(2);
        assert_eq!(
            cross().regular_normal_cone(&o).unwrap(),
            PolyCone::orthant(2)
        );
        let half = PolySet::convex(Polyhedron::from_h(2, &[(qvec(&[1, 0]), q(0))], &[]).unwrap());
        assert_eq!(
            half.regular_normal_cone(&qvec(&[0, 5])).unwrap(),
            ray(&[1, 0])
        );
    }

    #[test]
    fn limiting_normals_of_cross() {
        let n = cross().limiting_normal_cone(&zeros(2));
        let expected = cu(vec![
            PolyCone::subspace(2, &[qvec(&[0, 1])]).unwrap(),
            PolyCone::subspace(2, &[qvec(&[1, 0])]).unwrap(),
            PolyCone::orthant(2),
        ]);
        assert!(n.set_eq(&expected));
    }

    #[test]
    fn limiting_normals_of_complementarity_graph() {
        let n = gph_n_rminus().limiting_normal_cone(&zeros(2));
        let quad = PolyCone::from_v(2, &[qvec(&[1, 0]), qvec(&[0, -1])], &[]).unwrap();
        let expected = cu(vec![
            quad,
            PolyCone::subspace(2, &[qvec(&[0, 1])]).unwrap(),
            PolyCone::subspace(2, &[qvec(&[1, 0])]).unwrap(),
        ]);
        assert!(n.set_eq(&expected));
    }

    #[test]
    fn directional_normals() {
        let rminus = PolySet::convex(Polyhedron::from_h(1, &[(qvec(&[1]), q(0))], &[]).unwrap());
        let o = zeros(1);
        assert_eq!(
            rminus
                .directional_limiting_normal_cone(&o, &qvec(&[-1]))
                .components(),
            &[PolyCone::zero(1)]
        );
        assert_eq!(
            rminus
                .directional_limiting_normal_cone(&o, &qvec(&[0]))
                .components(),
            &[PolyCone::orthant(1)]
        );
        assert!(rminus
            .directional_limiting_normal_cone(&o, &qvec(&[1]))
            .is_empty());
        let n = gph_n_rminus().directional_limiting_normal_cone(&zeros(2), &qvec(&[0, 1]));
        assert_eq!(
            n.components(),
            &[PolyCone::subspace(2, &[qvec(&[1, 0])]).unwrap()]
        );
    }

    #[test]
    fn critical_cones() {
        let rminus = Polyhedron::from_h(1, &[(qvec(&[1]), q(0))], &[]).unwrap();
        assert_eq!(
            critical_cone(&rminus, &qvec(&[0]), &qvec(&[0])).unwrap(),
            PolyCone::orthant(1).polar()
        );
        assert_eq!(
            critical_cone(&rminus, &qvec(&[0]), &qvec(&[1])).unwrap(),
            PolyCone::zero(1)
        );
        assert!(critical_cone(&rminus, &qvec(&[0]), &qvec(&[-1])).is_err());
        let quad = Polyhedron::from_cone(&PolyCone::orthant(2).polar());
        assert_eq!(
            critical_cone(&quad, &zeros(2), &qvec(&[1, 1])).unwrap(),
            PolyCone::zero(2)
        );
    }

    #[test]
    fn reduction_model_examples() {
        let rminus = Polyhedron::from_h(1, &[(qvec(&[1]), q(0))], &[]).unwrap();
        let m = ncone_graph_local_model(&rminus, &qvec(&[0]), &qvec(&[0])).unwrap();
        assert!(m.model.set_eq(&gph_n_rminus()));
        assert!(m.radius.is_none());
        let m = ncone_graph_local_model(&rminus, &qvec(&[0]), &qvec(&[1])).unwrap();
        let vertical = PolySet::convex(Polyhedron::from_cone(
            &PolyCone::subspace(2, &[qvec(&[0, 1])]).unwrap(),
        ));
        assert!(m.model.set_eq(&vertical));
        let boxd = Polyhedron::from_h(1, &[(qvec(&[1]), q(1)), (qvec(&[-1]), q(1))], &[]).unwrap();
        let m = ncone_graph_local_model(&boxd, &qvec(&[1]), &qvec(&[2])).unwrap();
        assert!(m.model.set_eq(&vertical));
        assert!(m.radius.unwrap() >= qr(1, 2));
    }

    #[test]
    fn union_inclusion_needs_cells() {
        // Two halves of the plane cover it, though neither contains it.
        let left = Polyhedron::from_h(2, &[(qvec(&[1, 0]), q(0))], &[]).unwrap();
        let right = Polyhedron::from_h(2, &[(qvec(&[-1, 0]), q(0))], &[]).unwrap();
        let halves = PolySet::new(2, vec![left.clone(), right]).unwrap();
        let plane = PolySet::convex(Polyhedron::universe(2));
        assert!(plane.set_eq(&halves));
        let w = union_difference_witness(&[Polyhedron::universe(2)], &[left]).unwrap();
        assert!(w[0].is_positive());
    }
}
