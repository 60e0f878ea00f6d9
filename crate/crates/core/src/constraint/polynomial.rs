//! Multivariate polynomials with exact rational coefficients.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::geometry::*;

/// Sparse polynomial: map from exponent vector to coefficient; no zero coefficients stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, Q>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: Q) -> Self {
        let mut p = Polynomial::zero(nvars);
        p.add_term(c, vec![0; nvars]);
        p
    }

    /// The coordinate function `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Polynomial::zero(nvars);
        p.add_term(Q::one(), e);
        p
    }

    /// `a·x + b`.
    pub fn affine(a: &[Q], b: Q) -> Self {
        let n = a.len();
        let mut p = Polynomial::constant(n, b);
        for (i, c) in a.iter().enumerate() {
            let mut e = vec![0; n];
            e[i] = 1;
            p.add_term(c.clone(), e);
        }
        p
    }

    pub fn from_terms(nvars: usize, terms: Vec<(Q, Vec<u32>)>) -> Result<Self> {
        let mut p = Polynomial::zero(nvars);
        for (c, e) in terms {
            if e.len() != nvars {
                return Err(Error::dim("monomial exponent vector", nvars, e.len()));
            }
            p.add_term(c, e);
        }
        Ok(p)
    }

    fn add_term(&mut self, c: Q, e: Vec<u32>) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(e).or_insert_with(Q::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Q)> {
        self.terms.iter()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: &[Q]) -> Q {
        let mut s = Q::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (xi, &k) in x.iter().zip(e) {
                for _ in 0..k {
                    t *= xi;
                }
            }
            s += t;
        }
        s
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .zip(x)
                    .fold(to_f64(c), |acc, (&k, xi)| acc * xi.powi(k as i32))
            })
            .sum()
    }

    pub fn derivative(&self, i: usize) -> Polynomial {
        let mut p = Polynomial::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[i] -= 1;
            p.add_term(c * Q::from_integer(e[i].into()), e2);
        }
        p
    }

    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.nvars).map(|i| self.derivative(i)).collect()
    }

    pub fn scale(&self, s: &Q) -> Polynomial {
        let mut p = Polynomial::zero(self.nvars);
        for (e, c) in &self.terms {
            p.add_term(c * s, e.clone());
        }
        p
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut p = self.clone();
        for (e, c) in &other.terms {
            p.add_term(c.clone(), e.clone());
        }
        p
    }

    /// Renames variables: variable `i` of `self` becomes variable `map[i]` of a ring with `nvars` variables.
    pub fn substitute_vars(&self, map: &[usize], nvars: usize) -> Polynomial {
        let mut p = Polynomial::zero(nvars);
        for (e, c) in &self.terms {
            let mut e2 = vec![0; nvars];
            for (i, &k) in e.iter().enumerate() {
                e2[map[i]] += k;
            }
            p.add_term(c.clone(), e2);
        }
        p
    }
}

/// Vector of polynomials `g : Q^n → Q^s`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PolynomialMap {
    nvars: usize,
    components: Vec<Polynomial>,
}

impl PolynomialMap {
    pub fn new(nvars: usize, components: Vec<Polynomial>) -> Result<Self> {
        for c in &components {
            if c.nvars != nvars {
                return Err(Error::dim("polynomial variables", nvars, c.nvars));
            }
        }
        Ok(PolynomialMap { nvars, components })
    }

    /// `x ↦ M x + c`.
    pub fn affine(m: &[Vec<Q>], c: &[Q], nvars: usize) -> Result<Self> {
        let comps = m
            .iter()
            .zip(c)
            .map(|(row, ci)| {
                if row.len() != nvars {
                    return Err(Error::dim("affine map row", nvars, row.len()));
                }
                Ok(Polynomial::affine(row, ci.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        PolynomialMap::new(nvars, comps)
    }

    pub fn identity(n: usize) -> Self {
        PolynomialMap::affine(&linalg::identity(n), &zeros(n), n).expect("consistent dims")
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn out_dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn is_affine(&self) -> bool {
        self.components.iter().all(|c| c.degree() <= 1)
    }

    pub fn eval(&self, x: &[Q]) -> Vec<Q> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    pub fn eval_f64(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval_f64(x)).collect()
    }

    /// Jacobian `∇g(x)`, an `s × n` matrix.
    pub fn jacobian(&self, x: &[Q]) -> Vec<Vec<Q>> {
        self.components
            .iter()
            .map(|c| (0..self.nvars).map(|i| c.derivative(i).eval(x)).collect())
            .collect()
    }

    /// Hessian of component `i` at `x`.
    pub fn hessian(&self, i: usize, x: &[Q]) -> Vec<Vec<Q>> {
        let g = self.components[i].gradient();
        g.iter()
            .map(|gi| (0..self.nvars).map(|j| gi.derivative(j).eval(x)).collect())
            .collect()
    }

    /// `∇²⟨λ, g⟩(x)`.
    pub fn hessian_contraction(&self, lambda: &[Q], x: &[Q]) -> Vec<Vec<Q>> {
        let mut h = vec![zeros(self.nvars); self.nvars];
        for (i, l) in lambda.iter().enumerate() {
            if l.is_zero() {
                continue;
            }
            for (hr, r) in h.iter_mut().zip(self.hessian(i, x)) {
                for (a, b) in hr.iter_mut().zip(r) {
                    *a += l * b;
                }
            }
        }
        h
    }

    pub fn substitute_vars(&self, map: &[usize], nvars: usize) -> PolynomialMap {
        PolynomialMap {
            nvars,
            components: self
                .components
                .iter()
                .map(|c| c.substitute_vars(map, nvars))
                .collect(),
        }
    }

    /// Flips the sign of one coefficient; used by the mutation self-test.
    pub fn negate_term(&mut self, comp: usize, exponent: &[u32]) -> bool {
        match self
            .components
            .get_mut(comp)
            .and_then(|c| c.terms.get_mut(exponent))
        {
            Some(c) => {
                *c = -c.clone();
                true
            }
            None => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_are_exact() {
        // p = 3 x0^2 x1 - x1 + 1/2
        let p = Polynomial::from_terms(
            2,
            vec![
                (q(3), vec![2, 1]),
                (q(-1), vec![0, 1]),
                (qr(1, 2), vec![0, 0]),
            ],
        )
        .unwrap();
        let x = qvec(&[2, 5]);
        assert_eq!(p.eval(&x), q(60) - q(5) + qr(1, 2));
        assert_eq!(p.derivative(0).eval(&x), q(60));
        assert_eq!(p.derivative(1).eval(&x), q(11));
        let g = PolynomialMap::new(2, vec![p]).unwrap();
        let h = g.hessian(0, &x);
        assert_eq!(h, vec![qvec(&[30, 12]), qvec(&[12, 0])]);
        assert!(!g.is_affine());
    }

    #[test]
    fn cancellation_removes_terms() {
        let a = Polynomial::var(1, 0);
        assert!(a.add(&a.scale(&q(-1))).is_zero());
    }

    #[test]
    fn substitution_merges_monomials() {
        // x0 * x1 with x1 := x0 gives x0^2
        let p = Polynomial::from_terms(2, vec![(q(1), vec![1, 1])]).unwrap();
        let s = p.substitute_vars(&[0, 0], 1);
        assert_eq!(s, Polynomial::from_terms(1, vec![(q(1), vec![2])]).unwrap());
    }
}
