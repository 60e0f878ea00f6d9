//! Constraint systems `g(x) ∈ D` and the derivatives of their normal cone maps.

mod polynomial;

pub use polynomial::{Polynomial, PolynomialMap};

use num_traits::Zero;
use rayon::prelude::*;

use crate::cones::{critical_cone, ncone_graph_local_model, ConeUnion, PolySet};
use crate::error::{Error, Result};
use crate::geometry::linalg::{mat_vec, nullspace, rref, subspace_intersection, transpose};
use crate::geometry::*;

/// `Γ = {x : g(x) ∈ D}` with polynomial `g` and convex polyhedral `D`.
#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    pub g: PolynomialMap,
    pub d: Polyhedron,
}

/// `Γ(p, x) = {z : g(p, x, z) ∈ D}` with `p ∈ Q^l` and `x, z ∈ Q^n`.
#[derive(Clone, Debug)]
pub struct ParametricSystem {
    pub l: usize,
    pub n: usize,
    pub g: PolynomialMap,
    pub d: Polyhedron,
}

/// First and second order data of `y ⇉ β(y)ᵀ N_D(g̃(y))` at a base point `y`.
///
/// For a plain system `g̃ = g` and `β = ∇g`; for a parametric one `g̃(p,x) = g(p,x,x)`
/// and `β(p,x) = ∇₃g(p,x,x)`.
#[derive(Clone, Debug)]
pub struct ProductData {
    pub d: Polyhedron,
    /// `g̃(y)`.
    pub z: Vec<Q>,
    /// `∇g̃(y)`, an `s × dim` matrix.
    pub jac: Vec<Vec<Q>>,
    /// `β(y)`, an `s × n` matrix.
    pub beta: Vec<Vec<Q>>,
    /// `∇β_i(y)` for each row `i` of `β`, each an `n × dim` matrix; `∇⟨λ,β⟩(y) = Σ λ_i ∇β_i(y)`.
    pub curvature: Vec<Vec<Vec<Q>>>,
    pub affine: bool,
}

impl ProductData {
    pub fn s(&self) -> usize {
        self.z.len()
    }
    /// Dimension of the base variable `y`.
    pub fn dim(&self) -> usize {
        self.jac.first().map_or(0, Vec::len)
    }
    /// Dimension of the dual variable `x*`.
    pub fn n(&self) -> usize {
        self.beta.first().map_or(0, Vec::len)
    }

    /// `∇⟨λ, β⟩(y)`.
    pub fn curvature_at(&self, lambda: &[Q]) -> Vec<Vec<Q>> {
        let mut w = vec![zeros(self.dim()); self.n()];
        for (l, c) in lambda.iter().zip(&self.curvature) {
            if l.is_zero() {
                continue;
            }
            for (wr, cr) in w.iter_mut().zip(c) {
                for (a, b) in wr.iter_mut().zip(cr) {
                    *a += l * b;
                }
            }
        }
        w
    }

    /// The `n × s` matrix of `λ ↦ ∇⟨λ, β⟩(y) v`.
    fn curvature_times(&self, v: &[Q]) -> Vec<Vec<Q>> {
        let cols: Vec<Vec<Q>> = self.curvature.iter().map(|c| mat_vec(c, v)).collect();
        transpose(&cols, self.n())
    }

    /// The `dim × s` matrix of `λ ↦ ∇⟨λ, β⟩(y)ᵀ w*`.
    fn curvature_transpose_times(&self, wstar: &[Q]) -> Vec<Vec<Q>> {
        let cols: Vec<Vec<Q>> = self
            .curvature
            .iter()
            .map(|c| linalg::vec_mat(wstar, c, self.dim()))
            .collect();
        transpose(&cols, self.dim())
    }

    fn beta_t(&self) -> Vec<Vec<Q>> {
        transpose(&self.beta, self.n())
    }

    fn jac_t(&self) -> Vec<Vec<Q>> {
        transpose(&self.jac, self.dim())
    }
}

impl ConstraintSystem {
    pub fn new(g: PolynomialMap, d: Polyhedron) -> Result<Self> {
        if g.out_dim() != d.dim() {
            return Err(Error::dim("constraint map output", d.dim(), g.out_dim()));
        }
        Ok(ConstraintSystem { g, d })
    }

    pub fn n(&self) -> usize {
        self.g.nvars()
    }

    pub fn is_feasible(&self, x: &[Q]) -> bool {
        x.len() == self.n() && self.d.contains(&self.g.eval(x))
    }

    pub fn product_data(&self, x: &[Q]) -> Result<ProductData> {
        if x.len() != self.n() {
            return Err(Error::dim("constraint point", self.n(), x.len()));
        }
        let z = self.g.eval(x);
        if !self.d.contains(&z) {
            return Err(Error::pre("g(x) is not in D"));
        }
        let jac = self.g.jacobian(x);
        let curvature = (0..self.g.out_dim())
            .map(|i| self.g.hessian(i, x))
            .collect();
        Ok(ProductData {
            d: self.d.clone(),
            z,
            beta: jac.clone(),
            jac,
            curvature,
            affine: self.g.is_affine(),
        })
    }
}

impl ParametricSystem {
    pub fn new(l: usize, n: usize, g: PolynomialMap, d: Polyhedron) -> Result<Self> {
        if g.nvars() != l + 2 * n {
            return Err(Error::dim("parametric map variables", l + 2 * n, g.nvars()));
        }
        if g.out_dim() != d.dim() {
            return Err(Error::dim("constraint map output", d.dim(), g.out_dim()));
        }
        Ok(ParametricSystem { l, n, g, d })
    }

    fn diagonal_map(&self) -> Vec<usize> {
        (0..self.l + 2 * self.n)
            .map(|i| if i < self.l + self.n { i } else { i - self.n })
            .collect()
    }

    /// `g̃(p, x) = g(p, x, x)`.
    pub fn g_tilde(&self) -> PolynomialMap {
        self.g
            .substitute_vars(&self.diagonal_map(), self.l + self.n)
    }

    /// Entries `β_ij(p, x) = ∂g_i/∂z_j (p, x, x)`.
    pub fn beta(&self) -> Vec<Vec<Polynomial>> {
        let map = self.diagonal_map();
        self.g
            .components()
            .iter()
            .map(|gi| {
                (0..self.n)
                    .map(|j| {
                        gi.derivative(self.l + self.n + j)
                            .substitute_vars(&map, self.l + self.n)
                    })
                    .collect()
            })
            .collect()
    }

    /// Whether `g` does not depend on the middle block.
    pub fn independent_of_x(&self) -> bool {
        self.g.components().iter().all(|c| {
            c.terms()
                .all(|(e, _)| e[self.l..self.l + self.n].iter().all(|&k| k == 0))
        })
    }

    pub fn product_data(&self, p: &[Q], x: &[Q]) -> Result<ProductData> {
        if p.len() != self.l || x.len() != self.n {
            return Err(Error::dim(
                "parametric point",
                self.l + self.n,
                p.len() + x.len(),
            ));
        }
        let y = concat(p, x);
        let gt = self.g_tilde();
        let z = gt.eval(&y);
        if !self.d.contains(&z) {
            return Err(Error::pre("g(p, x, x) is not in D"));
        }
        let jac = gt.jacobian(&y);
        let beta_polys = self.beta();
        let beta = beta_polys
            .iter()
            .map(|row| row.iter().map(|b| b.eval(&y)).collect())
            .collect();
        let curvature = beta_polys
            .iter()
            .map(|row| {
                row.iter()
                    .map(|b| {
                        (0..self.l + self.n)
                            .map(|k| b.derivative(k).eval(&y))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(ProductData {
            d: self.d.clone(),
            z,
            jac,
            beta,
            curvature,
            affine: self.g.is_affine(),
        })
    }
}

/// A relatively open piece of the multiplier set on which the critical cone is constant.
#[derive(Clone, Debug)]
pub struct MultiplierCell {
    pub witness: Vec<Q>,
    pub closure: Polyhedron,
    /// `K_D(g̃(y), λ)` for every `λ` in the cell.
    pub critical_cone: PolyCone,
}

/// `Λ = {λ ∈ N_D(g̃(y)) : β(y)ᵀ λ = x*}` with its decomposition by faces of `N_D(g̃(y))`.
#[derive(Clone, Debug)]
pub struct MultiplierSet {
    pub set: Polyhedron,
    pub cells: Vec<MultiplierCell>,
}

impl MultiplierSet {
    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }
}

pub fn multipliers(pd: &ProductData, xstar: &[Q]) -> Result<MultiplierSet> {
    if xstar.len() != pd.n() {
        return Err(Error::dim("dual vector", pd.n(), xstar.len()));
    }
    let s = pd.s();
    let ncone = pd.d.normal_cone(&pd.z)?;
    let bt = pd.beta_t();
    let eq: Vec<(Vec<Q>, Q)> = bt.into_iter().zip(xstar.iter().cloned()).collect();
    let set = Polyhedron::from_cone(&ncone).with_constraints(&[], &eq)?;
    let hs: Vec<(Vec<Q>, Q)> = ncone
        .ineq()
        .iter()
        .map(|a| (a.clone(), Q::zero()))
        .collect();
    let cells = cells(&set, &hs)
        .into_iter()
        .map(|c| {
            let critical_cone =
                critical_cone(&pd.d, &pd.z, &c.witness).expect("witness is a normal");
            MultiplierCell {
                witness: c.witness,
                closure: c.closure,
                critical_cone,
            }
        })
        .collect();
    debug_assert!(s == pd.d.dim());
    Ok(MultiplierSet { set, cells })
}

pub fn multiplier_set(sys: &ConstraintSystem, x: &[Q], xstar: &[Q]) -> Result<MultiplierSet> {
    multipliers(&sys.product_data(x)?, xstar)
}

/// Outcome of a nondegeneracy test `Mᵀ μ = 0, μ ∈ sp N_{T_D(z)}(w) ⟹ μ = 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NondegeneracyVerdict {
    pub holds: bool,
    /// True when `w ∉ T_D(z)`, in which case the normal cone is empty.
    pub vacuous: bool,
    pub span_dim: usize,
    /// Basis of `ker Mᵀ ∩ sp N_{T_D(z)}(w)` in reduced echelon form; empty iff `holds`.
    pub kernel_basis: Vec<Vec<Q>>,
}

/// Nondegeneracy of the matrix `m` (`s × k`) with respect to `D` at `z` in the direction `w = ∇g̃ v`.
pub fn nondegeneracy(
    d: &Polyhedron,
    z: &[Q],
    m: &[Vec<Q>],
    w: &[Q],
) -> Result<NondegeneracyVerdict> {
    let t = d.tangent_cone(z)?;
    if !t.contains(w) {
        return Ok(NondegeneracyVerdict {
            holds: true,
            vacuous: true,
            span_dim: 0,
            kernel_basis: Vec::new(),
        });
    }
    let s = d.dim();
    let mut span: Vec<Vec<Q>> = t
        .ineq()
        .iter()
        .filter(|a| dot(a, w).is_zero())
        .cloned()
        .collect();
    span.extend(t.eq().iter().cloned());
    let (span, _) = rref(&span, s);
    let k = m.first().map_or(0, Vec::len);
    let kernel = nullspace(&transpose(m, k), s);
    let basis = subspace_intersection(&span, &kernel, s);
    let basis: Vec<Vec<Q>> = basis.iter().map(|b| int_to_q(&primitive(b))).collect();
    Ok(NondegeneracyVerdict {
        holds: basis.is_empty(),
        vacuous: false,
        span_dim: span.len(),
        kernel_basis: basis,
    })
}

/// Eq. `∇g(x)ᵀμ = 0, μ ∈ sp N_{T_D(g(x))}(∇g(x)u) ⟹ μ = 0`.
pub fn check_directional_nondegeneracy(
    sys: &ConstraintSystem,
    x: &[Q],
    u: &[Q],
) -> Result<NondegeneracyVerdict> {
    let pd = sys.product_data(x)?;
    if u.len() != sys.n() {
        return Err(Error::dim("direction", sys.n(), u.len()));
    }
    nondegeneracy(&pd.d, &pd.z, &pd.jac, &mat_vec(&pd.jac, u))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubregularityCondition {
    AffineMap,
    DirectionalNondegeneracy,
    KernelCondition,
}

impl SubregularityCondition {
    pub fn name(&self) -> &'static str {
        match self {
            SubregularityCondition::AffineMap => "affine",
            SubregularityCondition::DirectionalNondegeneracy => "directional-nondegeneracy",
            SubregularityCondition::KernelCondition => "kernel-condition",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SubregularityReport {
    pub checks: Vec<(SubregularityCondition, bool)>,
    /// First condition that holds, if any.
    pub certified_by: Option<SubregularityCondition>,
}

/// Sufficient conditions for metric subregularity of `g(·) − D` at `x`, evaluated in order.
/// The directional test uses `u` (the zero direction gives standard nondegeneracy).
pub fn subregularity_certificates(
    sys: &ConstraintSystem,
    x: &[Q],
    u: Option<&[Q]>,
) -> Result<SubregularityReport> {
    let pd = sys.product_data(x)?;
    let zero = zeros(sys.n());
    let u = u.unwrap_or(&zero);
    let affine = pd.affine;
    let nondeg = nondegeneracy(&pd.d, &pd.z, &pd.jac, &mat_vec(&pd.jac, u))?.holds;
    let ncone = pd.d.normal_cone(&pd.z)?;
    let kernel = PolyCone::subspace(pd.s(), &nullspace(&pd.jac_t(), pd.s()))?;
    let kernel_ok = ncone.intersect(&kernel)?.is_zero();
    let checks = vec![
        (SubregularityCondition::AffineMap, affine),
        (SubregularityCondition::DirectionalNondegeneracy, nondeg),
        (SubregularityCondition::KernelCondition, kernel_ok),
    ];
    let certified_by = checks.iter().find(|(_, ok)| *ok).map(|(c, _)| *c);
    Ok(SubregularityReport {
        checks,
        certified_by,
    })
}

/// One piece `∇⟨λ,β⟩(y)v + β(y)ᵀ N_{K}(∇g̃(y)v)` of the graphical derivative.
#[derive(Clone, Debug)]
pub struct GderPiece {
    pub lambda: Vec<Q>,
    pub critical_cone: PolyCone,
    /// `β(y)ᵀ N_K(∇g̃(y) v)`, `None` when `∇g̃(y) v ∉ K`.
    pub cone: Option<PolyCone>,
    /// Whether `∇g(x)ᵀ N_K(∇g(x)u) = N_{∇g(x)⁻¹K}(u)`; only checked for plain systems.
    pub forms_agree: Option<bool>,
}

#[derive(Clone, Debug)]
pub struct GderResult {
    pub value: PolySet,
    pub pieces: Vec<GderPiece>,
    pub multipliers: MultiplierSet,
}

impl GderResult {
    pub fn forms_agree(&self) -> bool {
        self.pieces.iter().all(|p| p.forms_agree != Some(false))
    }
}

/// `∪_λ ∇⟨λ,β⟩(y)v + β(y)ᵀ N_{K_D(g̃(y),λ)}(∇g̃(y)v)` over `λ ∈ Λ(y, x*)`.
pub fn gder(pd: &ProductData, xstar: &[Q], v: &[Q], compare_forms: bool) -> Result<GderResult> {
    if v.len() != pd.dim() {
        return Err(Error::dim("direction", pd.dim(), v.len()));
    }
    let mult = multipliers(pd, xstar)?;
    if mult.is_empty() {
        return Err(Error::pre(
            "x* is not in β(y)ᵀ N_D(g̃(y)); the multiplier set is empty",
        ));
    }
    let w = mat_vec(&pd.jac, v);
    let bt = pd.beta_t();
    let lv = pd.curvature_times(v);
    let results: Vec<(GderPiece, Option<Polyhedron>)> = mult
        .cells
        .par_iter()
        .map(|c| {
            let k = &c.critical_cone;
            let cone = if k.contains(&w) {
                Some(
                    k.normal_at(&w)
                        .expect("w in K")
                        .linear_image(&bt)
                        .expect("dims"),
                )
            } else {
                None
            };
            let forms_agree = compare_forms.then(|| {
                let kg = k.linear_preimage(&pd.jac, pd.dim()).expect("dims");
                match (&cone, kg.contains(v)) {
                    (Some(cn), true) => *cn == kg.normal_at(v).expect("v in K_Γ"),
                    (None, false) => true,
                    _ => false,
                }
            });
            let comp = cone.as_ref().map(|cn| {
                let offset = c.closure.linear_image(&lv).expect("dims");
                offset
                    .minkowski_sum(&Polyhedron::from_cone(cn))
                    .expect("dims")
            });
            (
                GderPiece {
                    lambda: c.witness.clone(),
                    critical_cone: k.clone(),
                    cone,
                    forms_agree,
                },
                comp,
            )
        })
        .collect();
    let (pieces, comps): (Vec<GderPiece>, Vec<Option<Polyhedron>>) = results.into_iter().unzip();
    let value = PolySet::new(pd.n(), comps.into_iter().flatten().collect())?;
    Ok(GderResult {
        value,
        pieces,
        multipliers: mult,
    })
}

/// Graphical derivative of `N_Γ` at `(x, x*)` applied to `u`, with the subregularity certificates.
pub fn gder_normal_cone_map(
    sys: &ConstraintSystem,
    x: &[Q],
    xstar: &[Q],
    u: &[Q],
) -> Result<(GderResult, SubregularityReport)> {
    let pd = sys.product_data(x)?;
    let res = gder(&pd, xstar, u, true)?;
    let cert = subregularity_certificates(sys, x, Some(u))?;
    Ok((res, cert))
}

/// A stratum of the coderivative estimate: a joint cell of `(λ, η)`.
#[derive(Clone, Debug)]
pub struct CoderivStratum {
    pub lambda: Vec<Q>,
    pub eta: Vec<Q>,
    /// Closure of the joint cell in `(λ, η)` space.
    pub closure: Polyhedron,
    /// `N_{gph N_D}((z, λ); (∇g̃ v, η))`.
    pub normals: ConeUnion,
}

fn coderiv_strata(
    pd: &ProductData,
    xstar: &[Q],
    v: &[Q],
    ustar: &[Q],
) -> Result<Vec<CoderivStratum>> {
    let mult = multipliers(pd, xstar)?;
    if mult.is_empty() {
        return Err(Error::pre("the multiplier set is empty"));
    }
    let s = pd.s();
    let w = mat_vec(&pd.jac, v);
    let lv = pd.curvature_times(v);
    let bt = pd.beta_t();
    let per_cell: Vec<Vec<CoderivStratum>> = mult
        .cells
        .par_iter()
        .map(|c| -> Result<Vec<CoderivStratum>> {
            let k = &c.critical_cone;
            if !k.contains(&w) {
                return Ok(Vec::new());
            }
            let nk = k.normal_at(&w)?;
            let lift_l = |a: &Vec<Q>| concat(a, &zeros(s));
            let lift_e = |a: &Vec<Q>| concat(&zeros(s), a);
            let mut ineq: Vec<(Vec<Q>, Q)> = c
                .closure
                .ineq()
                .into_iter()
                .map(|(a, b)| (lift_l(&a), b))
                .collect();
            ineq.extend(nk.ineq().iter().map(|a| (lift_e(a), Q::zero())));
            let mut eq: Vec<(Vec<Q>, Q)> = c
                .closure
                .eq()
                .into_iter()
                .map(|(a, b)| (lift_l(&a), b))
                .collect();
            eq.extend(nk.eq().iter().map(|a| (lift_e(a), Q::zero())));
            for j in 0..pd.n() {
                eq.push((concat(&lv[j], &bt[j]), ustar[j].clone()));
            }
            let joint = Polyhedron::from_h(2 * s, &ineq, &eq)?;
            if joint.is_empty() {
                return Ok(Vec::new());
            }
            let model = ncone_graph_local_model(&pd.d, &pd.z, &c.witness)?.model;
            let mut hs = Vec::new();
            for comp in model.components() {
                for (a, _) in comp.ineq().into_iter().chain(comp.eq()) {
                    let (aw, ae) = a.split_at(s);
                    if !is_zero_vec(ae) {
                        hs.push((concat(&zeros(s), ae), -dot(aw, &w)));
                    }
                }
            }
            hs.sort();
            hs.dedup();
            let model_cones = ConeUnion::new(
                2 * s,
                model
                    .components()
                    .iter()
                    .map(|p| p.as_cone().expect("model is conic"))
                    .collect(),
            )?;
            Ok(cells(&joint, &hs)
                .into_iter()
                .map(|cell| {
                    let (lambda, eta) = cell.witness.split_at(s);
                    let normals = model_cones.limiting_normal_cone(&concat(&w, eta));
                    CoderivStratum {
                        lambda: lambda.to_vec(),
                        eta: eta.to_vec(),
                        closure: cell.closure,
                        normals,
                    }
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

fn check_u_star(pd: &ProductData, xstar: &[Q], v: &[Q], ustar: &[Q]) -> Result<()> {
    if ustar.len() != pd.n() {
        return Err(Error::dim("u*", pd.n(), ustar.len()));
    }
    if !gder(pd, xstar, v, false)?.value.contains(ustar) {
        return Err(Error::pre(
            "u* is not in the graphical derivative of the normal cone map",
        ));
    }
    Ok(())
}

/// Upper estimate of `D*N((y, x*); (v, u*))(w*)`; requires the nondegeneracy hypotheses.
pub fn coderivative_estimate(
    pd: &ProductData,
    xstar: &[Q],
    v: &[Q],
    ustar: &[Q],
    wstar: &[Q],
) -> Result<PolySet> {
    if wstar.len() != pd.n() {
        return Err(Error::dim("w*", pd.n(), wstar.len()));
    }
    require_nondegeneracy(pd, v)?;
    check_u_star(pd, xstar, v, ustar)?;
    let s = pd.s();
    let strata = coderiv_strata(pd, xstar, v, ustar)?;
    let bw = neg(&mat_vec(&pd.beta, wstar));
    let gt = pd.jac_t();
    let wt = pd.curvature_transpose_times(wstar);
    let offset_map: Vec<Vec<Q>> = wt.iter().map(|r| concat(r, &zeros(s))).collect();
    let mut comps = Vec::new();
    for st in &strata {
        let offset = st.closure.linear_image(&offset_map)?;
        let zeta = crate::maps::slice(&st.normals.to_polyset(), &bw, false);
        for z in zeta.components() {
            comps.push(offset.minkowski_sum(&z.linear_image(&gt)?)?);
        }
    }
    PolySet::new(pd.dim(), comps)
}

fn require_nondegeneracy(pd: &ProductData, v: &[Q]) -> Result<()> {
    let w = mat_vec(&pd.jac, v);
    if !nondegeneracy(&pd.d, &pd.z, &pd.jac, &w)?.holds {
        return Err(Error::MissingCertificate(
            "nondegeneracy of ∇g̃ in the given direction".into(),
        ));
    }
    if !nondegeneracy(&pd.d, &pd.z, &pd.beta, &w)?.holds {
        return Err(Error::MissingCertificate(
            "nondegeneracy of β in the given direction".into(),
        ));
    }
    Ok(())
}

pub fn dir_coderivative_estimate(
    sys: &ConstraintSystem,
    x: &[Q],
    xstar: &[Q],
    u: &[Q],
    ustar: &[Q],
    wstar: &[Q],
) -> Result<PolySet> {
    coderivative_estimate(&sys.product_data(x)?, xstar, u, ustar, wstar)
}

/// Result of checking `⟨v, w⟩ = ⟨u*, w*⟩` over all strata of the coderivative estimate.
#[derive(Clone, Debug, Default)]
pub struct SemismoothnessReport {
    pub strata: usize,
    pub checks: usize,
    /// `(λ, w*, ζ)` triples where the identity failed.
    pub violations: Vec<(Vec<Q>, Vec<Q>, Vec<Q>)>,
}

impl SemismoothnessReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the semismoothness* identity exactly on the generators of every stratum.
pub fn semismoothness(
    pd: &ProductData,
    xstar: &[Q],
    v: &[Q],
    ustar: &[Q],
) -> Result<SemismoothnessReport> {
    require_nondegeneracy(pd, v)?;
    check_u_star(pd, xstar, v, ustar)?;
    let s = pd.s();
    let n = pd.n();
    let strata = coderiv_strata(pd, xstar, v, ustar)?;
    // (w*, ζ) ↦ (ζ, −β w*)
    let embed: Vec<Vec<Q>> = (0..2 * s)
        .map(|i| {
            if i < s {
                concat(&zeros(n), &unit(s, i))
            } else {
                concat(&neg(&pd.beta[i - s]), &zeros(s))
            }
        })
        .collect();
    let mut rep = SemismoothnessReport {
        strata: strata.len(),
        ..Default::default()
    };
    for st in &strata {
        let lam_points: Vec<(Vec<Q>, bool)> = st
            .closure
            .vertices()
            .into_iter()
            .map(|p| (p[..s].to_vec(), true))
            .chain(
                st.closure
                    .rays()
                    .into_iter()
                    .map(|r| (r[..s].to_vec(), false)),
            )
            .chain(
                st.closure
                    .lineality()
                    .into_iter()
                    .map(|r| (r[..s].to_vec(), false)),
            )
            .collect();
        for k in st.normals.components() {
            let g = k.linear_preimage(&embed, n + s)?;
            let gens: Vec<Vec<Q>> = g
                .rays()
                .iter()
                .cloned()
                .chain(g.lineality().iter().cloned())
                .collect();
            for gen in gens {
                let (wstar, zeta) = gen.split_at(n);
                for (lam, affine_part) in &lam_points {
                    rep.checks += 1;
                    let wl = pd.curvature_at(lam);
                    let mut val = dot(&mat_vec(&wl, v), wstar);
                    if *affine_part {
                        val += dot(&mat_vec(&pd.jac, v), zeta) - dot(ustar, wstar);
                    }
                    if !val.is_zero() {
                        rep.violations
                            .push((lam.clone(), wstar.to_vec(), zeta.to_vec()));
                    }
                }
            }
        }
    }
    Ok(rep)
}

pub fn semismoothness_check(
    sys: &ConstraintSystem,
    x: &[Q],
    xstar: &[Q],
    u: &[Q],
    ustar: &[Q],
) -> Result<SemismoothnessReport> {
    semismoothness(&sys.product_data(x)?, xstar, u, ustar)
}

/// Verdicts of the two nondegeneracy conditions for a parametric system.
#[derive(Clone, Debug)]
pub struct ParametricConditions {
    /// Condition with `∇g̃(y)`.
    pub with_jacobian: NondegeneracyVerdict,
    /// Condition with `β(y)`.
    pub with_beta: NondegeneracyVerdict,
    /// `∇₂g = 0`, in which case the `β` condition implies the `∇g̃` condition.
    pub x_independent: bool,
    pub affine: bool,
}

impl ParametricConditions {
    /// Whether the standing metric inequality is certified.
    pub fn standing_assumption(&self) -> bool {
        self.affine || (self.with_jacobian.holds && self.with_beta.holds)
    }
}

pub fn parametric_conditions(
    psys: &ParametricSystem,
    p: &[Q],
    x: &[Q],
    v: &[Q],
) -> Result<ParametricConditions> {
    let pd = psys.product_data(p, x)?;
    if v.len() != pd.dim() {
        return Err(Error::dim("direction", pd.dim(), v.len()));
    }
    let w = mat_vec(&pd.jac, v);
    Ok(ParametricConditions {
        with_jacobian: nondegeneracy(&pd.d, &pd.z, &pd.jac, &w)?,
        with_beta: nondegeneracy(&pd.d, &pd.z, &pd.beta, &w)?,
        x_independent: psys.independent_of_x(),
        affine: pd.affine,
    })
}

pub fn parametric_gder(
    psys: &ParametricSystem,
    p: &[Q],
    x: &[Q],
    xstar: &[Q],
    v: &[Q],
) -> Result<(GderResult, ParametricConditions)> {
    let pd = psys.product_data(p, x)?;
    let res = gder(&pd, xstar, v, false)?;
    Ok((res, parametric_conditions(psys, p, x, v)?))
}

pub fn parametric_coderivative_estimate(
    psys: &ParametricSystem,
    p: &[Q],
    x: &[Q],
    xstar: &[Q],
    v: &[Q],
    ustar: &[Q],
    wstar: &[Q],
) -> Result<PolySet> {
    coderivative_estimate(&psys.product_data(p, x)?, xstar, v, ustar, wstar)
}

pub fn parametric_semismoothness_check(
    psys: &ParametricSystem,
    p: &[Q],
    x: &[Q],
    xstar: &[Q],
    v: &[Q],
    ustar: &[Q],
) -> Result<SemismoothnessReport> {
    semismoothness(&psys.product_data(p, x)?, xstar, v, ustar)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rminus(s: usize) -> Polyhedron {
        Polyhedron::from_cone(&PolyCone::orthant(s).polar())
    }

    fn identity_sys(s: usize) -> ConstraintSystem {
        ConstraintSystem::new(PolynomialMap::identity(s), rminus(s)).unwrap()
    }

    pub(crate) fn example_35() -> ConstraintSystem {
        let t = |c: i64, e: [u32; 4]| (q(c), e.to_vec());
        let rows = vec![
            vec![t(1, [1, 0, 0, 0]), t(-1, [0, 0, 0, 1])],
            vec![t(-1, [1, 0, 0, 0]), t(-1, [0, 0, 0, 1])],
            vec![t(1, [0, 1, 0, 0]), t(-1, [0, 0, 0, 1])],
            vec![t(-1, [0, 1, 0, 0]), t(-1, [0, 0, 0, 1])],
            vec![t(1, [0, 0, 1, 0]), t(1, [2, 0, 0, 0]), t(-1, [0, 0, 0, 1])],
            vec![t(-1, [0, 0, 1, 0]), t(-1, [0, 0, 0, 1])],
        ];
        let comps = rows
            .into_iter()
            .map(|r| Polynomial::from_terms(4, r).unwrap())
            .collect();
        ConstraintSystem::new(PolynomialMap::new(4, comps).unwrap(), rminus(6)).unwrap()
    }

    #[test]
    fn multiplier_examples() {
        let m = multiplier_set(&identity_sys(1), &qvec(&[0]), &qvec(&[0])).unwrap();
        assert_eq!(m.set, Polyhedron::point(&qvec(&[0])));
        let m = multiplier_set(&identity_sys(2), &qvec(&[0, 0]), &qvec(&[1, 1])).unwrap();
        assert_eq!(m.set, Polyhedron::point(&qvec(&[1, 1])));
        let m = multiplier_set(&example_35(), &zeros(4), &zeros(4)).unwrap();
        assert_eq!(m.set, Polyhedron::point(&zeros(6)));
    }

    #[test]
    fn gder_of_rminus() {
        let sys = identity_sys(1);
        let o = qvec(&[0]);
        let at = |u: i64| {
            gder_normal_cone_map(&sys, &o, &o, &qvec(&[u]))
                .unwrap()
                .0
                .value
        };
        assert!(at(-1).set_eq(&PolySet::convex(Polyhedron::point(&o))));
        assert!(
            at(0).set_eq(&PolySet::convex(Polyhedron::from_cone(&PolyCone::orthant(
                1
            ))))
        );
        assert!(at(1).is_empty());
    }

    #[test]
    fn gder_with_unique_active_multiplier() {
        let sys = identity_sys(2);
        let (r, _) = gder_normal_cone_map(&sys, &zeros(2), &qvec(&[1, 1]), &zeros(2)).unwrap();
        assert!(r.value.set_eq(&PolySet::convex(Polyhedron::universe(2))));
        let (r, _) =
            gder_normal_cone_map(&sys, &zeros(2), &qvec(&[1, 1]), &qvec(&[-1, 0])).unwrap();
        assert!(r.value.is_empty());
        assert!(r.forms_agree());
    }

    #[test]
    fn example_35_nondegeneracy() {
        let sys = example_35();
        let v = check_directional_nondegeneracy(&sys, &zeros(4), &zeros(4)).unwrap();
        assert!(!v.holds);
        assert_eq!(v.span_dim, 6);
        let expected = rref(
            &[qvec(&[1, 1, 0, 0, -1, -1]), qvec(&[0, 0, 1, 1, -1, -1])],
            6,
        )
        .0;
        assert_eq!(rref(&v.kernel_basis, 6).0, expected);
        let v = check_directional_nondegeneracy(&sys, &zeros(4), &qvec(&[0, 0, 0, 1])).unwrap();
        assert!(v.holds && !v.vacuous);
        let c = subregularity_certificates(&sys, &zeros(4), None).unwrap();
        assert_eq!(
            c.certified_by,
            Some(SubregularityCondition::KernelCondition)
        );
    }

    #[test]
    fn undetermined_subregularity() {
        let g = PolynomialMap::new(
            1,
            vec![Polynomial::from_terms(1, vec![(q(1), vec![2])]).unwrap()],
        )
        .unwrap();
        let d = Polyhedron::point(&qvec(&[0]));
        let sys = ConstraintSystem::new(g, d).unwrap();
        let c = subregularity_certificates(&sys, &qvec(&[0]), None).unwrap();
        assert!(c.certified_by.is_none());
        assert!(c.checks.iter().all(|(_, ok)| !ok));
    }

    #[test]
    fn coderivative_of_rminus() {
        let sys = identity_sys(1);
        let o = qvec(&[0]);
        let est = dir_coderivative_estimate(&sys, &o, &o, &qvec(&[-1]), &o, &qvec(&[1])).unwrap();
        assert!(est.set_eq(&PolySet::convex(Polyhedron::point(&o))));
        let rep = semismoothness_check(&sys, &o, &o, &qvec(&[0]), &qvec(&[1])).unwrap();
        assert!(rep.holds() && rep.strata > 0);
    }

    #[test]
    fn hessian_enters_the_derivative() {
        let sys = example_35();
        let xstar = qvec(&[0, 0, 1, -1]);
        let (r, cert) =
            gder_normal_cone_map(&sys, &zeros(4), &xstar, &qvec(&[1, 0, 1, 1])).unwrap();
        assert!(cert.certified_by.is_some());
        assert!(r.value.contains(&qvec(&[2, 0, 0, 0])));
        assert!(!r.value.contains(&qvec(&[-2, 0, 0, 0])));
    }

    #[test]
    fn parametric_reduces_to_plain() {
        let sys = example_35();
        // g(p, x, z) = φ(z) with one parameter
        let map: Vec<usize> = (0..4).map(|i| 5 + i).collect();
        let g = sys.g.substitute_vars(&map, 9);
        let psys = ParametricSystem::new(1, 4, g, sys.d.clone()).unwrap();
        let xstar = qvec(&[0, 0, 1, -1]);
        let u = qvec(&[1, 0, 1, 1]);
        let (plain, _) = gder_normal_cone_map(&sys, &zeros(4), &xstar, &u).unwrap();
        let (par, cond) = parametric_gder(
            &psys,
            &qvec(&[3]),
            &zeros(4),
            &xstar,
            &concat(&qvec(&[7]), &u),
        )
        .unwrap();
        assert!(plain.value.set_eq(&par.value));
        assert!(cond.x_independent);
    }
}
