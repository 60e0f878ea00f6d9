//! Double description over the integers for cones `{y : A y <= 0, E y = 0}`.

use num_bigint::{BigInt, Sign};
use num_traits::{Signed, Zero};

use super::rational::{int_dot, primitive_int, Z};

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64).max(1)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn and(&self, o: &Bits) -> Bits {
        Bits(self.0.iter().zip(&o.0).map(|(a, b)| a & b).collect())
    }
    fn subset_of(&self, o: &Bits) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| a & !b == 0)
    }
}

/// Generators of a polyhedral cone: extreme rays (modulo lineality) and a lineality basis.
pub(crate) struct Generators {
    pub rays: Vec<Vec<Z>>,
    pub lineality: Vec<Vec<Z>>,
}

fn lincomb(a: &Z, x: &[Z], b: &Z, y: &[Z]) -> Vec<Z> {
    primitive_int(x.iter().zip(y).map(|(xi, yi)| a * xi + b * yi).collect())
}

/// Runs the double description method on the integer rows.
pub(crate) fn double_description(ineq: &[Vec<Z>], eq: &[Vec<Z>], dim: usize) -> Generators {
    let mut lin: Vec<Vec<Z>> = (0..dim)
        .map(|i| {
            let mut v = vec![BigInt::zero(); dim];
            v[i] = BigInt::from(1);
            v
        })
        .collect();
    let mut rays: Vec<(Vec<Z>, Bits)> = Vec::new();
    let nbits = ineq.len();

    for a in eq {
        let Some(k) = lin.iter().position(|l| !int_dot(a, l).is_zero()) else {
            // Rays only appear after inequalities, so nothing else to cut.
            continue;
        };
        let l0 = lin.swap_remove(k);
        let al0 = int_dot(a, &l0);
        for l in lin.iter_mut() {
            let al = int_dot(a, l);
            if !al.is_zero() {
                *l = lincomb(&al0, l, &-al, &l0);
            }
        }
    }

    for (i, a) in ineq.iter().enumerate() {
        if let Some(k) = lin.iter().position(|l| !int_dot(a, l).is_zero()) {
            let mut l0 = lin.swap_remove(k);
            let mut al0 = int_dot(a, &l0);
            if al0.is_positive() {
                l0 = l0.iter().map(|x| -x).collect();
                al0 = -al0;
            }
            for l in lin.iter_mut() {
                let al = int_dot(a, l);
                if !al.is_zero() {
                    *l = lincomb(&al0, l, &-al, &l0);
                }
            }
            let abs = al0.abs();
            for (r, z) in rays.iter_mut() {
                let ar = int_dot(a, r);
                if !ar.is_zero() {
                    *r = lincomb(&abs, r, &ar, &l0);
                }
                z.set(i);
            }
            let mut z = Bits::new(nbits);
            for j in 0..i {
                z.set(j);
            }
            rays.push((l0, z));
            continue;
        }

        let vals: Vec<Z> = rays.iter().map(|(r, _)| int_dot(a, r)).collect();
        let pos: Vec<usize> = (0..rays.len())
            .filter(|&j| vals[j].sign() == Sign::Plus)
            .collect();
        if pos.is_empty() {
            for (j, (_, z)) in rays.iter_mut().enumerate() {
                if vals[j].is_zero() {
                    z.set(i);
                }
            }
            continue;
        }
        let negs: Vec<usize> = (0..rays.len())
            .filter(|&j| vals[j].sign() == Sign::Minus)
            .collect();
        let mut next: Vec<(Vec<Z>, Bits)> = Vec::new();
        for &p in &pos {
            for &n in &negs {
                let common = rays[p].1.and(&rays[n].1);
                let adjacent =
                    !(0..rays.len()).any(|r| r != p && r != n && common.subset_of(&rays[r].1));
                if adjacent {
                    let v = lincomb(&vals[p], &rays[n].0, &-vals[n].clone(), &rays[p].0);
                    let mut z = common;
                    z.set(i);
                    next.push((v, z));
                }
            }
        }
        for (j, (r, mut z)) in rays.into_iter().enumerate() {
            match vals[j].sign() {
                Sign::Minus => next.push((r, z)),
                Sign::NoSign => {
                    z.set(i);
                    next.push((r, z));
                }
                Sign::Plus => {}
            }
        }
        rays = next;
    }

    Generators {
        rays: rays.into_iter().map(|(r, _)| r).collect(),
        lineality: lin,
    }
}
