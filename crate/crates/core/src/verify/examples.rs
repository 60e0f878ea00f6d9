//! The example gallery: analytic oracles and the checks run on them.

use std::f64::consts::{PI, TAU};

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::constraint::{
    check_directional_nondegeneracy, gder_normal_cone_map, subregularity_certificates,
    ConstraintSystem, Polynomial, PolynomialMap, SubregularityCondition,
};
use crate::error::Result;
use crate::geometry::linalg::{mat_vec, rref};

/// The map whose graph is the cone over the curve `t ↦ (cos t, sin t, 1/t − 1/(2π))`, `t ∈ (0, 2π]`.
pub struct CurveConeMap;

impl CurveConeMap {
    /// Curve parameter of the ray through `y ≠ 0`.
    pub fn angle(y: &[f64]) -> f64 {
        let a = y[1].atan2(y[0]);
        if a <= 0.0 {
            a + TAU
        } else {
            a
        }
    }

    pub fn height(t: f64) -> f64 {
        1.0 / t - 1.0 / TAU
    }

    fn value(y: &[f64]) -> f64 {
        let r = norm(y);
        if r == 0.0 {
            0.0
        } else {
            r * Self::height(Self::angle(y))
        }
    }
}

impl MapOracle for CurveConeMap {
    fn in_dim(&self) -> usize {
        2
    }
    fn out_dim(&self) -> usize {
        1
    }
    fn project_domain(&self, y: &[f64]) -> Option<Vec<f64>> {
        Some(y.to_vec())
    }
    fn sample_values(&self, y: &[f64]) -> Vec<Vec<f64>> {
        vec![vec![Self::value(y)]]
    }
    fn dist_to_values(&self, y: &[f64], x: &[f64]) -> Option<f64> {
        Some((x[0] - Self::value(y)).abs())
    }
}

/// Closed-form directional modulus of the curve cone map in direction `(cos t, sin t)`.
pub fn curve_modulus(t: f64) -> f64 {
    CurveConeMap::height(t)
}

#[derive(Clone, Debug)]
pub struct CurveModulus {
    pub t: f64,
    pub expected: f64,
    pub fuzzy: ModulusEstimate,
    pub strict: ModulusEstimate,
}

/// Fuzzy and non-fuzzy inner calmness* moduli of the curve cone map at the origin in direction `(cos t, sin t)`.
pub fn curve_modulus_estimate(t: f64, schedule: &Schedule) -> CurveModulus {
    let dir = vec![vec![t.cos(), t.sin()]];
    let o = [0.0, 0.0];
    let fuzzy = estimate_modulus(
        &CurveConeMap,
        &o,
        &ModulusKind::FuzzyInnerCalmStar,
        &dir,
        schedule,
    )
    .remove(0);
    let strict = estimate_modulus(
        &CurveConeMap,
        &o,
        &ModulusKind::InnerCalmStar,
        &dir,
        schedule,
    )
    .remove(0);
    let expected = if (t - TAU).abs() < 1e-12 || t.abs() < 1e-12 {
        0.0
    } else {
        curve_modulus(t.rem_euclid(TAU))
    };
    CurveModulus {
        t,
        expected,
        fuzzy,
        strict,
    }
}

/// The step map `S(y) = {0}` for `y ≤ 0` and `{1}` for `y ≥ 0`.
pub fn step_map() -> PolyMap {
    let lower =
        Polyhedron::from_h(2, &[(qvec(&[1, 0]), q(0))], &[(qvec(&[0, 1]), q(0))]).expect("dims");
    let upper =
        Polyhedron::from_h(2, &[(qvec(&[-1, 0]), q(0))], &[(qvec(&[0, 1]), q(1))]).expect("dims");
    PolyMap::from_components(1, 1, vec![lower, upper]).expect("dims")
}

#[derive(Clone, Debug)]
pub struct StepMapReport {
    /// Inner calmness* estimates in the directions `-1` and `+1`.
    pub inner_calm_star: Vec<ModulusEstimate>,
    /// Inner calmness at `(0, 0)` in the directions `-1` and `+1`.
    pub inner_calm_at_zero: Vec<ModulusEstimate>,
}

impl StepMapReport {
    pub fn passes(&self) -> bool {
        self.inner_calm_star.iter().all(|e| e.estimate == 0.0)
            && self.inner_calm_at_zero.iter().any(|e| e.diverges)
    }
}

pub fn step_map_report(schedule: &Schedule) -> StepMapReport {
    let s = step_map();
    let o = PolyMapOracle::new(&s);
    let dirs = vec![vec![-1.0], vec![1.0]];
    StepMapReport {
        inner_calm_star: estimate_modulus(&o, &[0.0], &ModulusKind::InnerCalmStar, &dirs, schedule),
        inner_calm_at_zero: estimate_modulus(
            &o,
            &[0.0],
            &ModulusKind::InnerCalm(vec![0.0]),
            &dirs,
            schedule,
        ),
    }
}

/// Separating halfspace `⟨b_k, z⟩ ≤ c_k` for the convex hull of the curve, built at parameter `t_k`.
#[derive(Clone, Debug)]
pub struct HullHalfspace {
    pub t: f64,
    pub q: f64,
    pub b: [f64; 3],
    pub c: f64,
}

impl HullHalfspace {
    pub fn new(t: f64) -> Self {
        let q = t * t * (1.0 / t - 1.0 / TAU);
        let b = [
            t.sin() + q * t.cos(),
            1.0 - t.cos() + q * t.sin(),
            -t * t * (1.0 - t.cos()),
        ];
        HullHalfspace {
            t,
            q,
            b,
            c: t.sin() + q * t.cos(),
        }
    }

    pub fn h(&self, s: f64) -> f64 {
        self.b[0] * s.cos() + self.b[1] * s.sin() + self.b[2] * CurveConeMap::height(s)
    }

    pub fn dh(&self, s: f64) -> f64 {
        -self.b[0] * s.sin() + self.b[1] * s.cos() - self.b[2] / (s * s)
    }

    pub fn d2h(&self, s: f64) -> f64 {
        -self.b[0] * s.cos() - self.b[1] * s.sin() + 2.0 * self.b[2] / (s * s * s)
    }

    /// The closed form `−(sin t + q + 2(1 − cos t)/t)` of `h''(t)`.
    pub fn d2h_closed_form(&self) -> f64 {
        -(self.t.sin() + self.q + 2.0 * (1.0 - self.t.cos()) / self.t)
    }

    pub fn contains(&self, z: [f64; 3]) -> bool {
        self.b[0] * z[0] + self.b[1] * z[1] + self.b[2] * z[2] <= self.c + EPS
    }

    /// Smallest height `x` with `(cos t, sin t, x)` in the halfspace.
    pub fn fiber_threshold(&self) -> f64 {
        (self.c - self.b[0] * self.t.cos() - self.b[1] * self.t.sin()) / self.b[2]
    }
}

#[derive(Clone, Debug)]
pub struct HullLevel {
    pub t: f64,
    pub dh: f64,
    pub dh_numeric: f64,
    pub d2h: f64,
    pub d2h_closed_form: f64,
    pub h_at_two_pi_gap: f64,
    pub curve_samples: usize,
    pub curve_violations: usize,
    pub hull_samples: usize,
    pub hull_violations: usize,
    pub fiber_threshold: f64,
    /// Height of the curve point above `y_k`, which attains the threshold.
    pub curve_height: f64,
}

impl HullLevel {
    pub fn passes(&self) -> bool {
        self.dh.abs() <= EPS
            && (self.dh - self.dh_numeric).abs() <= 1e-6
            && self.d2h < 0.0
            && (self.d2h - self.d2h_closed_form).abs() <= 1e-9
            && self.h_at_two_pi_gap.abs() <= EPS
            && self.curve_violations == 0
            && self.hull_violations == 0
            && (self.fiber_threshold - self.curve_height).abs() <= 1e-9
    }
}

/// Certificate that the closed convex hull of the curve has no bounded selections over `y_k → (1, 0)`.
pub fn hull_certificate(ts: &[f64], seed: u64) -> Vec<HullLevel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ts.iter()
        .map(|&t| {
            let hs = HullHalfspace::new(t);
            let step = 1e-5;
            let grid: Vec<f64> = (1..=4000).map(|i| TAU * i as f64 / 4000.0).collect();
            let point = |s: f64| [s.cos(), s.sin(), CurveConeMap::height(s)];
            let curve_violations = grid.iter().filter(|&&s| !hs.contains(point(s))).count();
            let hull_samples = 2000;
            let hull_violations = (0..hull_samples)
                .filter(|_| {
                    let ws: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
                    let total: f64 = ws.iter().sum();
                    let mut z = [0.0; 3];
                    for w in &ws {
                        let p = point(rng.gen_range(1e-3..TAU));
                        for i in 0..3 {
                            z[i] += w / total * p[i];
                        }
                    }
                    !hs.contains(z)
                })
                .count();
            HullLevel {
                t,
                dh: hs.dh(t),
                dh_numeric: (hs.h(t + step) - hs.h(t - step)) / (2.0 * step),
                d2h: hs.d2h(t),
                d2h_closed_form: hs.d2h_closed_form(),
                h_at_two_pi_gap: hs.h(TAU) - hs.h(t),
                curve_samples: grid.len(),
                curve_violations,
                hull_samples,
                hull_violations,
                fiber_threshold: hs.fiber_threshold(),
                curve_height: CurveConeMap::height(t),
            }
        })
        .collect()
}

pub fn verify_not_inner_semicompact_example() -> Vec<HullLevel> {
    hull_certificate(&[0.5, 0.25, 0.125], 0)
}

/// `φ(x) ≤ 0` with the six constraints `±x₁ − x₄`, `±x₂ − x₄`, `x₃ + x₁² − x₄`, `−x₃ − x₄`.
pub fn directional_nondegeneracy_system() -> ConstraintSystem {
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
        .map(|r| Polynomial::from_terms(4, r).expect("valid terms"))
        .collect();
    let d = Polyhedron::from_cone(&PolyCone::orthant(6).polar());
    ConstraintSystem::new(PolynomialMap::new(4, comps).expect("dims"), d).expect("dims")
}

/// Kernel of `∇φ(0)ᵀ` as stated for the system.
pub fn expected_kernel() -> Vec<Vec<Q>> {
    vec![qvec(&[1, 1, 0, 0, -1, -1]), qvec(&[0, 0, 1, 1, -1, -1])]
}

#[derive(Clone, Debug)]
pub struct NondegeneracyReport {
    pub degenerate_at_zero: bool,
    pub kernel_dim: usize,
    pub kernel_matches: bool,
    pub sampled: usize,
    pub nondegenerate: usize,
    pub kernel_condition: bool,
    /// `D N_Γ(0, x*)(u)` contains `∇²⟨λ, φ⟩ u = (2,0,0,0)` and not its negative.
    pub curvature_check: bool,
}

impl NondegeneracyReport {
    pub fn passes(&self) -> bool {
        self.degenerate_at_zero
            && self.kernel_matches
            && self.nondegenerate == self.sampled
            && self.kernel_condition
            && self.curvature_check
    }
}

/// Directions `u ≠ 0` with `∇φ(0) u ≤ 0`, that is `|u₁|, |u₂|, |u₃| ≤ u₄`.
pub fn feasible_directions(count: usize, seed: u64) -> Vec<Vec<Q>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u4: i64 = rng.gen_range(1..=5);
            let mut u: Vec<i64> = (0..3).map(|_| rng.gen_range(-u4..=u4)).collect();
            u.push(u4);
            qvec(&u)
        })
        .collect()
}

pub fn nondegeneracy_report(
    sys: &ConstraintSystem,
    samples: usize,
    seed: u64,
) -> Result<NondegeneracyReport> {
    let x = zeros(4);
    let v0 = check_directional_nondegeneracy(sys, &x, &zeros(4))?;
    let kernel_matches =
        !v0.kernel_basis.is_empty() && rref(&v0.kernel_basis, 6).0 == rref(&expected_kernel(), 6).0;
    let jac = sys.g.jacobian(&x);
    let mut sampled = 0;
    let mut nondegenerate = 0;
    for u in feasible_directions(samples, seed) {
        if mat_vec(&jac, &u).iter().any(|v| *v > Q::zero()) {
            continue;
        }
        sampled += 1;
        if check_directional_nondegeneracy(sys, &x, &u)?.holds {
            nondegenerate += 1;
        }
    }
    let cert = subregularity_certificates(sys, &x, None)?;
    let kernel_condition = cert
        .checks
        .iter()
        .any(|(c, ok)| *c == SubregularityCondition::KernelCondition && *ok);
    let (g, _) = gder_normal_cone_map(sys, &x, &qvec(&[0, 0, 1, -1]), &qvec(&[1, 0, 1, 1]))?;
    let curvature_check =
        g.value.contains(&qvec(&[2, 0, 0, 0])) && !g.value.contains(&qvec(&[-2, 0, 0, 0]));
    Ok(NondegeneracyReport {
        degenerate_at_zero: !v0.holds,
        kernel_dim: v0.kernel_basis.len(),
        kernel_matches,
        sampled,
        nondegenerate,
        kernel_condition,
        curvature_check,
    })
}

/// `C = R₋ × R × {0} ∪ {x₁ > 0, x₂ = √x₁, x₃ = √x₂}` projected onto `(x₁, x₂)` at the origin in direction `(0, 1)`.
#[derive(Clone, Debug)]
pub struct SqrtStrataReport {
    /// `‖Ψ(y_k)‖/‖y_k‖` along `y_k = (1/k², 1/k)` for growing `k`.
    pub curve_ratios: Vec<f64>,
    /// The same ratio along `ỹ_k = (0, 1/k)`.
    pub axis_ratios: Vec<f64>,
    /// Distance of the normalized curve normals at `y_k` to the line through `(−1, 0)`.
    pub normal_gaps: Vec<f64>,
    /// The unique `u ∈ T_C(0)` with `∇φ(0) u = v`.
    pub fiber_direction: Option<Vec<Q>>,
    /// Whether `∇φ(0)ᵀ y* ∈ N_C(0; u)` for `y* = (−1, 0)`.
    pub estimate_holds: bool,
}

impl SqrtStrataReport {
    pub fn passes(&self) -> bool {
        let grows = self.curve_ratios.windows(2).all(|w| w[1] > w[0])
            && self.curve_ratios.last().is_some_and(|r| *r > 10.0);
        let bounded = self.axis_ratios.iter().all(|r| (r - 1.0).abs() <= EPS);
        let normals = self.normal_gaps.last().is_some_and(|g| *g < 1e-2);
        grows
            && bounded
            && normals
            && self.fiber_direction == Some(qvec(&[0, 1, 0]))
            && !self.estimate_holds
    }
}

/// Tangent cone of the strata at the origin: `R₋ × R × {0} ∪ {0} × {0} × R₊`.
fn sqrt_strata_tangent() -> PolySet {
    let half = Polyhedron::from_h(3, &[(qvec(&[1, 0, 0]), q(0))], &[(qvec(&[0, 0, 1]), q(0))])
        .expect("dims");
    let ray = Polyhedron::from_h(
        3,
        &[(qvec(&[0, 0, -1]), q(0))],
        &[(qvec(&[1, 0, 0]), q(0)), (qvec(&[0, 1, 0]), q(0))],
    )
    .expect("dims");
    PolySet::new(3, vec![half, ray]).expect("dims")
}

pub fn sqrt_strata_report() -> SqrtStrataReport {
    let ks: Vec<f64> = (1..=12).map(|j| (1u64 << j) as f64).collect();
    let curve_ratios = ks
        .iter()
        .map(|k| {
            let y = [1.0 / (k * k), 1.0 / k];
            let x = [y[0], y[1], y[1].sqrt()];
            norm(&x) / norm(&y)
        })
        .collect();
    let axis_ratios = ks
        .iter()
        .map(|k| norm(&[0.0, 1.0 / k, 0.0]) / norm(&[0.0, 1.0 / k]))
        .collect();
    let normal_gaps = ks
        .iter()
        .map(|k| {
            // the curve x₁ = x₂² has normal line spanned by (1, −2x₂) at (1/k², 1/k)
            let n = [1.0, -2.0 / k];
            (n[1] / norm(&n)).abs()
        })
        .collect();
    let t = sqrt_strata_tangent();
    let sel = [qvec(&[1, 0, 0]), qvec(&[0, 1, 0])];
    let fiber = t
        .intersect_poly(
            &Polyhedron::from_h(3, &[], &[(sel[0].clone(), q(0)), (sel[1].clone(), q(1))])
                .expect("dims"),
        )
        .expect("dims");
    let fiber_direction = match fiber.components() {
        [p] if p.vertices().len() == 1 && p.rays().is_empty() && p.lineality().is_empty() => {
            p.vertices().pop()
        }
        _ => None,
    };
    let estimate_holds = fiber_direction.as_ref().is_some_and(|u| {
        let ystar = qvec(&[-1, 0]);
        let g = linalg::vec_mat(&ystar, &sel, 3);
        t.directional_limiting_normal_cone(&zeros(3), u)
            .contains(&g)
    });
    SqrtStrataReport {
        curve_ratios,
        axis_ratios,
        normal_gaps,
        fiber_direction,
        estimate_holds,
    }
}

/// Directions `(cos t, sin t)` and closed-form moduli used by the gallery.
pub const CURVE_ANGLES: [f64; 3] = [PI / 2.0, PI, 3.0 * PI / 2.0];
