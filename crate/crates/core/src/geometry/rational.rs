use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Arbitrary precision rational scalar.
pub type Q = BigRational;
/// Arbitrary precision integer.
pub type Z = BigInt;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qr(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qvec(v: &[i64]) -> Vec<Q> {
    v.iter().map(|&x| q(x)).collect()
}

pub fn zeros(n: usize) -> Vec<Q> {
    vec![Q::zero(); n]
}

pub fn unit(n: usize, i: usize) -> Vec<Q> {
    let mut v = zeros(n);
    v[i] = Q::one();
    v
}

pub fn dot(a: &[Q], b: &[Q]) -> Q {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(Q::zero(), |acc, (x, y)| acc + x * y)
}

pub fn add(a: &[Q], b: &[Q]) -> Vec<Q> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[Q], b: &[Q]) -> Vec<Q> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[Q], s: &Q) -> Vec<Q> {
    a.iter().map(|x| x * s).collect()
}

pub fn neg(a: &[Q]) -> Vec<Q> {
    a.iter().map(|x| -x).collect()
}

pub fn norm_sq(a: &[Q]) -> Q {
    dot(a, a)
}

pub fn is_zero_vec(a: &[Q]) -> bool {
    a.iter().all(Zero::is_zero)
}

pub fn concat(a: &[Q], b: &[Q]) -> Vec<Q> {
    a.iter().chain(b).cloned().collect()
}

pub fn l1_norm(a: &[Q]) -> Q {
    a.iter().fold(Q::zero(), |acc, x| acc + x.abs())
}

pub fn to_f64(x: &Q) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn vec_to_f64(v: &[Q]) -> Vec<f64> {
    v.iter().map(to_f64).collect()
}

/// Exact rational closest to `x` with denominator `2^bits`.
pub fn from_f64(x: f64, bits: u32) -> Q {
    let scale = (1u64 << bits) as f64;
    let n = (x * scale).round();
    Q::new(BigInt::from(n as i64), BigInt::from(1u64 << bits))
}

/// The dyadic rational equal to a finite `x`.
pub fn exact_from_f64(x: f64) -> Q {
    Q::from_float(x).expect("finite float")
}

pub fn vec_from_f64(v: &[f64]) -> Vec<Q> {
    v.iter().map(|&x| exact_from_f64(x)).collect()
}

/// Scale a rational vector to the primitive integer vector with the same direction.
pub fn primitive(v: &[Q]) -> Vec<Z> {
    let mut den = BigInt::one();
    for x in v {
        den = den.lcm(x.denom());
    }
    let ints: Vec<Z> = v
        .iter()
        .map(|x| (x * Q::from_integer(den.clone())).to_integer())
        .collect();
    primitive_int(ints)
}

pub fn primitive_int(mut v: Vec<Z>) -> Vec<Z> {
    let mut g = BigInt::zero();
    for x in &v {
        g = g.gcd(x);
    }
    if !g.is_zero() && !g.is_one() {
        for x in v.iter_mut() {
            *x = &*x / &g;
        }
    }
    v
}

pub fn int_to_q(v: &[Z]) -> Vec<Q> {
    v.iter().map(|x| Q::from_integer(x.clone())).collect()
}

pub fn int_dot(a: &[Z], b: &[Z]) -> Z {
    a.iter()
        .zip(b)
        .fold(BigInt::zero(), |acc, (x, y)| acc + x * y)
}

/// Rational bounds `lo <= sqrt(x) <= hi` with relative gap below `2^-bits`;
/// exact (`lo == hi`) when `x` is the square of a rational.
pub fn sqrt_bounds(x: &Q, bits: u32) -> (Q, Q) {
    assert!(!x.is_negative(), "sqrt of negative rational");
    if x.is_zero() {
        return (Q::zero(), Q::zero());
    }
    let n = x.numer();
    let d = x.denom();
    let rn = n.sqrt();
    let rd = d.sqrt();
    if &(&rn * &rn) == n && &(&rd * &rd) == d {
        let r = Q::new(rn, rd);
        return (r.clone(), r);
    }
    // sqrt(n/d) = sqrt(n*d*s^2)/(d*s)
    let s = BigInt::one() << bits;
    let m = n * d * &s * &s;
    let lo = m.sqrt();
    let hi = &lo + BigInt::one();
    let den = d * &s;
    (Q::new(lo, den.clone()), Q::new(hi, den))
}

/// Helper for formatting a rational as `p/q`.
pub struct RatDisplay<'a>(pub &'a Q);

impl fmt::Display for RatDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_bounds_exact_on_squares() {
        assert_eq!(sqrt_bounds(&qr(9, 4), 20), (qr(3, 2), qr(3, 2)));
        let (lo, hi) = sqrt_bounds(&q(2), 30);
        assert!(&lo * &lo <= q(2) && &hi * &hi >= q(2));
        assert!(hi - lo < qr(1, 1 << 29));
    }

    #[test]
    fn primitive_keeps_sign() {
        let p = primitive(&[qr(-2, 3), qr(4, 3)]);
        assert_eq!(p, vec![BigInt::from(-1), BigInt::from(2)]);
    }
}
