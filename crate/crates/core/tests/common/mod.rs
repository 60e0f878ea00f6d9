#![allow(dead_code)]

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polycalm::calculus::MatrixMap;
use polycalm::cones::{critical_cone, PolySet};
use polycalm::constraint::{ConstraintSystem, ParametricSystem, Polynomial, PolynomialMap};
use polycalm::geometry::linalg::{identity, mat_vec, vec_mat};
use polycalm::geometry::*;
use polycalm::maps::PolyMap;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ints(rng: &mut ChaCha8Rng, n: usize, lo: i64, hi: i64) -> Vec<i64> {
    (0..n).map(|_| rng.gen_range(lo..=hi)).collect()
}

pub fn nonzero_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<Q> {
    loop {
        let r = ints(rng, n, -2, 2);
        if r.iter().any(|&x| x != 0) {
            return qvec(&r);
        }
    }
}

/// Nonnegative combination of the generators, with the lineality entering with both signs.
pub fn random_in_cone(k: &PolyCone, rng: &mut ChaCha8Rng) -> Vec<Q> {
    let mut v = zeros(k.dim());
    for r in k.rays() {
        v = add(&v, &scale(r, &q(rng.gen_range(0..=2))));
    }
    for l in k.lineality() {
        v = add(&v, &scale(l, &q(rng.gen_range(-2..=2))));
    }
    v
}

/// A point of `p`: a vertex, the relative-interior point, or a mix of both plus a ray.
pub fn random_point(p: &Polyhedron, rng: &mut ChaCha8Rng) -> Vec<Q> {
    let verts = p.vertices();
    let base = p.relint_point().expect("nonempty");
    let pick = match rng.gen_range(0..3) {
        0 if !verts.is_empty() => verts[rng.gen_range(0..verts.len())].clone(),
        1 if !verts.is_empty() => {
            let v = &verts[rng.gen_range(0..verts.len())];
            let w = qr(rng.gen_range(0..=2), 2);
            add(&scale(v, &w), &scale(&base, &(q(1) - &w)))
        }
        _ => base,
    };
    match p.rays().first() {
        Some(r) if rng.gen_bool(0.3) => add(&pick, r),
        _ => pick,
    }
}

/// A random face's relative-interior point, so that both vertices and interior points occur.
pub fn random_face_point(p: &Polyhedron, rng: &mut ChaCha8Rng) -> Vec<Q> {
    let faces = p.faces();
    let f = &faces[rng.gen_range(0..faces.len())];
    f.witness.clone()
}

/// Nonempty polyhedron in `Q^dim` with rows through `through` (slack 0 or 1) when given.
pub fn random_polyhedron(
    rng: &mut ChaCha8Rng,
    dim: usize,
    max_rows: usize,
    through: Option<&[Q]>,
) -> Polyhedron {
    loop {
        let nrows = rng.gen_range(1..=max_rows);
        let mut ineq = Vec::new();
        let mut eq = Vec::new();
        for _ in 0..nrows {
            let a = nonzero_row(rng, dim);
            let b = match through {
                Some(p) => dot(&a, p) + q(rng.gen_range(0..=1)),
                None => q(rng.gen_range(-2..=2)),
            };
            if rng.gen_bool(0.15) {
                let rhs = through.map_or(b, |p| dot(&a, p));
                eq.push((a, rhs));
            } else {
                ineq.push((a, b));
            }
        }
        let p = Polyhedron::from_h(dim, &ineq, &eq).expect("dims");
        if !p.is_empty() {
            return p;
        }
    }
}

/// Polyhedral map `Q^m ⇉ Q^n` whose first component passes through `(y, x)` when given.
pub fn random_polymap(
    rng: &mut ChaCha8Rng,
    m: usize,
    n: usize,
    through: Option<(&[Q], &[Q])>,
) -> PolyMap {
    let k = rng.gen_range(1..=3);
    let pt = through.map(|(y, x)| concat(y, x));
    let comps = (0..k)
        .map(|i| random_polyhedron(rng, m + n, 3, if i == 0 { pt.as_deref() } else { None }))
        .collect();
    PolyMap::from_components(m, n, comps).expect("dims")
}

pub fn small_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<Q> {
    qvec(&ints(rng, n, -1, 1))
}

/// A system `A x + b ∈ D` together with a feasible point with active rows.
pub struct AffineInstance {
    pub sys: ConstraintSystem,
    pub gamma: Polyhedron,
    pub x: Vec<Q>,
    pub xstar: Vec<Q>,
    pub u: Vec<Q>,
}

pub fn random_affine_instance(rng: &mut ChaCha8Rng) -> AffineInstance {
    let n = rng.gen_range(1..=4);
    let s = rng.gen_range(1..=5);
    let a: Vec<Vec<Q>> = (0..s).map(|_| qvec(&ints(rng, n, -2, 2))).collect();
    let b = qvec(&ints(rng, s, -2, 2));
    let x = small_point(rng, n);
    let z = add(&mat_vec(&a, &x), &b);
    let d = random_polyhedron(rng, s, s + 1, Some(&z));
    let g = PolynomialMap::affine(&a, &b, n).expect("dims");
    let sys = ConstraintSystem::new(g, d.clone()).expect("dims");
    let gamma = d.affine_preimage(&a, &b, n).expect("dims");
    let xstar = random_in_cone(&gamma.normal_cone(&x).expect("x in Γ"), rng);
    let u = if rng.gen_bool(0.75) {
        random_in_cone(&critical_cone(&gamma, &x, &xstar).expect("valid pair"), rng)
    } else {
        qvec(&ints(rng, n, -2, 2))
    };
    AffineInstance {
        sys,
        gamma,
        x,
        xstar,
        u,
    }
}

/// `g(p, x, y) = h(y)` with `h` of degree at most two.
pub struct ParametricInstance {
    pub plain: ConstraintSystem,
    pub psys: ParametricSystem,
    pub p: Vec<Q>,
    pub x: Vec<Q>,
    pub xstar: Vec<Q>,
    pub v: Vec<Q>,
}

pub fn random_quadratic_map(rng: &mut ChaCha8Rng, n: usize, s: usize) -> PolynomialMap {
    let comps = (0..s)
        .map(|_| {
            let mut terms: Vec<(Q, Vec<u32>)> = Vec::new();
            terms.push((q(rng.gen_range(-2..=2)), vec![0; n]));
            for i in 0..n {
                let mut e = vec![0; n];
                e[i] = 1;
                terms.push((q(rng.gen_range(-2..=2)), e));
            }
            if rng.gen_bool(0.6) {
                let mut e = vec![0; n];
                e[rng.gen_range(0..n)] += 1;
                e[rng.gen_range(0..n)] += 1;
                terms.push((q(rng.gen_range(-1..=1)), e));
            }
            terms.retain(|(c, _)| !c.is_zero());
            Polynomial::from_terms(n, terms).expect("valid terms")
        })
        .collect();
    PolynomialMap::new(n, comps).expect("dims")
}

pub fn random_parametric_instance(rng: &mut ChaCha8Rng) -> ParametricInstance {
    let l = rng.gen_range(1..=2);
    let n = rng.gen_range(1..=3);
    let s = rng.gen_range(1..=4);
    let h = random_quadratic_map(rng, n, s);
    let x = small_point(rng, n);
    let z = h.eval(&x);
    let d = random_polyhedron(rng, s, s + 1, Some(&z));
    let plain = ConstraintSystem::new(h.clone(), d.clone()).expect("dims");
    let embed: Vec<usize> = (0..n).map(|i| l + n + i).collect();
    let psys =
        ParametricSystem::new(l, n, h.substitute_vars(&embed, l + 2 * n), d.clone()).expect("dims");
    let jac = h.jacobian(&x);
    let xstar = vec_mat(
        &random_in_cone(&d.normal_cone(&z).expect("z in D"), rng),
        &jac,
        n,
    );
    let v = concat(&qvec(&ints(rng, l, -2, 2)), &qvec(&ints(rng, n, -2, 2)));
    ParametricInstance {
        plain,
        psys,
        p: small_point(rng, l),
        x,
        xstar,
        v,
    }
}

/// Base data for the calculus-rule instances.
pub struct RuleInstance {
    pub kind: &'static str,
    pub s1: Option<PolyMap>,
    pub m1: Option<MatrixMap>,
    pub s2: PolyMap,
    pub xbar: Vec<Q>,
    pub zbar: Vec<Q>,
    pub u: Vec<Q>,
}

pub fn random_rule_instance(rng: &mut ChaCha8Rng, kind: &'static str) -> RuleInstance {
    let n = rng.gen_range(1..=2);
    let m = rng.gen_range(1..=2);
    let xbar = small_point(rng, n);
    let ybar = small_point(rng, m);
    match kind {
        "chain" => {
            let s = rng.gen_range(1..=2);
            let zbar = small_point(rng, s);
            let s1 = random_polymap(rng, n, m, Some((&xbar, &ybar)));
            let s2 = random_polymap(rng, m, s, Some((&ybar, &zbar)));
            RuleInstance {
                kind,
                s1: Some(s1),
                m1: None,
                s2,
                xbar,
                zbar,
                u: Vec::new(),
            }
        }
        "sum" => {
            let y2 = small_point(rng, m);
            let s1 = random_polymap(rng, n, m, Some((&xbar, &ybar)));
            let s2 = random_polymap(rng, n, m, Some((&xbar, &y2)));
            RuleInstance {
                kind,
                s1: Some(s1),
                m1: None,
                s2,
                xbar,
                zbar: add(&ybar, &y2),
                u: Vec::new(),
            }
        }
        _ => {
            let l = rng.gen_range(1..=2);
            let a: Vec<Vec<Q>> = (0..m).map(|_| qvec(&ints(rng, l, -2, 2))).collect();
            let m1 = MatrixMap::constant(&a, n).expect("dims");
            let s2 = random_polymap(rng, n, m, Some((&xbar, &ybar)));
            let zbar = vec_mat(&ybar, &a, l);
            let u = qvec(&ints(rng, n, -2, 2));
            RuleInstance {
                kind,
                s1: None,
                m1: Some(m1),
                s2,
                xbar,
                zbar,
                u,
            }
        }
    }
}

/// Random domain points of a polyhedral map.
pub fn domain_points(s: &PolyMap, rng: &mut ChaCha8Rng, count: usize) -> Vec<Vec<Q>> {
    let dom = s.domain();
    (0..count)
        .map(|_| {
            let comps = dom.components();
            random_point(&comps[rng.gen_range(0..comps.len())], rng)
        })
        .collect()
}

pub fn box_around(center: &[Q], h: &Q) -> Polyhedron {
    let n = center.len();
    let ineq: Vec<(Vec<Q>, Q)> = (0..n)
        .flat_map(|i| {
            [
                (unit(n, i), &center[i] + h),
                (neg(&unit(n, i)), -(&center[i] - h)),
            ]
        })
        .collect();
    Polyhedron::from_h(n, &ineq, &[]).expect("dims")
}

pub fn translate(set: &PolySet, v: &[Q]) -> PolySet {
    let n = set.dim();
    set.affine_image(&identity(n), v).expect("dims")
}

pub mod invariants {
    use super::*;
    use polycalm::verify::{integer_directions, sample_tangent_exact};

    pub fn cone_from_rows(dim: usize, rows: &[Vec<i64>]) -> PolyCone {
        let ineq: Vec<Vec<Q>> = rows.iter().map(|r| qvec(&r[..dim])).collect();
        PolyCone::from_h(dim, &ineq, &[]).expect("dims")
    }

    pub fn polar_involution(k: &PolyCone) -> bool {
        k.polar().polar() == *k
    }

    /// H → V → H returns the same canonical cone.
    pub fn dd_round_trip(k: &PolyCone) -> bool {
        let v = PolyCone::from_v(k.dim(), k.rays(), k.lineality()).expect("dims");
        let h = PolyCone::from_h(k.dim(), k.ineq(), k.eq()).expect("dims");
        v == *k && h == *k && k.rays().iter().all(|r| k.contains(r))
    }

    /// The intersection of two faces is again a face.
    pub fn face_intersections_closed(k: &PolyCone) -> bool {
        let faces: Vec<PolyCone> = k.faces().into_iter().map(|f| f.cone).collect();
        faces.iter().all(|f| {
            faces.iter().all(|g| {
                let i = f.intersect(g).expect("dims");
                faces.contains(&i)
            })
        })
    }

    /// Exact grid sampling of `T_P(x)` agrees with the tangent cone once the scales are below the conic radius.
    pub fn tangent_sampling_agrees(p: &Polyhedron, x: &[Q]) -> bool {
        let set = PolySet::convex(p.clone());
        let t = p.tangent_cone(x).expect("x in P");
        let grid = integer_directions(p.dim(), 2);
        let rho = set.local_conic_radius(x).unwrap_or_else(|| q(1));
        let mut levels = 2;
        while q(4) / Q::from_integer(num_bigint::BigInt::from(1) << (levels / 2) as usize) >= rho {
            levels += 2;
        }
        let mut sampled = sample_tangent_exact(&set, x, &grid, levels);
        let mut expected: Vec<Vec<Q>> = grid.iter().filter(|u| t.contains(u)).cloned().collect();
        sampled.sort();
        expected.sort();
        sampled == expected
    }
}

pub mod strategies {
    use super::*;
    use proptest::prelude::*;

    fn rows(dim: usize, max: usize) -> impl Strategy<Value = Vec<Vec<i64>>> {
        prop::collection::vec(prop::collection::vec(-2i64..=2, dim), 1..=max)
    }

    /// `{x : A x ≤ 0}` with small integer rows.
    pub fn cone(max_dim: usize, max_rows: usize) -> impl Strategy<Value = PolyCone> {
        (1..=max_dim).prop_flat_map(move |d| {
            rows(d, max_rows).prop_map(move |r| invariants::cone_from_rows(d, &r))
        })
    }

    /// `cone(rays)` from small integer generators.
    pub fn generated_cone(max_dim: usize, max_rays: usize) -> impl Strategy<Value = PolyCone> {
        (1..=max_dim).prop_flat_map(move |d| {
            rows(d, max_rays).prop_map(move |r| {
                let rays: Vec<Vec<Q>> = r.iter().map(|v| qvec(v)).collect();
                PolyCone::from_v(d, &rays, &[]).expect("dims")
            })
        })
    }

    /// A nonempty polyhedron `{x : A x ≤ b}` and the witness of one of its faces.
    pub fn polyhedron_with_point(
        max_dim: usize,
        max_rows: usize,
    ) -> impl Strategy<Value = (Polyhedron, Vec<Q>)> {
        (1..=max_dim)
            .prop_flat_map(move |d| {
                (rows(d + 1, max_rows), any::<prop::sample::Index>())
                    .prop_map(move |(r, idx)| (d, r, idx))
            })
            .prop_filter_map("empty polyhedron", |(d, r, idx)| {
                let ineq: Vec<(Vec<Q>, Q)> =
                    r.iter().map(|row| (qvec(&row[..d]), q(row[d]))).collect();
                let p = Polyhedron::from_h(d, &ineq, &[]).expect("dims");
                if p.is_empty() {
                    return None;
                }
                let faces = p.faces();
                let x = faces[idx.index(faces.len())].witness.clone();
                Some((p, x))
            })
    }
}
