//! Dense exact linear algebra on rows of rationals.

use num_traits::{One, Zero};

use super::rational::*;

/// Reduced row echelon form. Returns the nonzero rows and their pivot columns.
pub fn rref(rows: &[Vec<Q>], ncols: usize) -> (Vec<Vec<Q>>, Vec<usize>) {
    let mut m: Vec<Vec<Q>> = rows.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == m.len() {
            break;
        }
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..ncols {
                    let d = &f * &m[r][j];
                    m[i][j] -= d;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    m.truncate(r);
    (m, pivots)
}

pub fn rank(rows: &[Vec<Q>], ncols: usize) -> usize {
    rref(rows, ncols).1.len()
}

/// Basis of `{x : rows · x = 0}`.
pub fn nullspace(rows: &[Vec<Q>], ncols: usize) -> Vec<Vec<Q>> {
    let (r, piv) = rref(rows, ncols);
    let free: Vec<usize> = (0..ncols).filter(|c| !piv.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = zeros(ncols);
            v[f] = Q::one();
            for (i, &p) in piv.iter().enumerate() {
                v[p] = -r[i][f].clone();
            }
            v
        })
        .collect()
}

/// Reduce `v` modulo the row space of an RREF matrix using its pivot columns.
/// The result is the unique representative of `v + rowspace` vanishing on every pivot column.
pub fn reduce_mod(v: &[Q], basis: &[Vec<Q>], pivots: &[usize]) -> Vec<Q> {
    let mut out = v.to_vec();
    for (row, &p) in basis.iter().zip(pivots) {
        if !out[p].is_zero() {
            let f = out[p].clone();
            for (o, b) in out.iter_mut().zip(row) {
                *o -= &f * b;
            }
        }
    }
    out
}

/// Some solution of `a x = b`, if one exists.
pub fn solve(a: &[Vec<Q>], b: &[Q], ncols: usize) -> Option<Vec<Q>> {
    let aug: Vec<Vec<Q>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let (r, piv) = rref(&aug, ncols + 1);
    if piv.last() == Some(&ncols) {
        return None;
    }
    let mut x = zeros(ncols);
    for (i, &p) in piv.iter().enumerate() {
        x[p] = r[i][ncols].clone();
    }
    Some(x)
}

pub fn transpose(a: &[Vec<Q>], ncols: usize) -> Vec<Vec<Q>> {
    (0..ncols)
        .map(|j| a.iter().map(|r| r[j].clone()).collect())
        .collect()
}

pub fn mat_vec(a: &[Vec<Q>], x: &[Q]) -> Vec<Q> {
    a.iter().map(|r| dot(r, x)).collect()
}

/// `xᵀ a`, i.e. `aᵀ x`, for an `m × n` matrix.
pub fn vec_mat(x: &[Q], a: &[Vec<Q>], ncols: usize) -> Vec<Q> {
    let mut out = zeros(ncols);
    for (xi, row) in x.iter().zip(a) {
        if xi.is_zero() {
            continue;
        }
        for (o, v) in out.iter_mut().zip(row) {
            *o += xi * v;
        }
    }
    out
}

pub fn mat_mul(a: &[Vec<Q>], b: &[Vec<Q>], ncols: usize) -> Vec<Vec<Q>> {
    a.iter().map(|r| vec_mat(r, b, ncols)).collect()
}

pub fn identity(n: usize) -> Vec<Vec<Q>> {
    (0..n).map(|i| unit(n, i)).collect()
}

/// Inverse of a square matrix, `None` when singular.
pub fn inverse(a: &[Vec<Q>]) -> Option<Vec<Vec<Q>>> {
    let n = a.len();
    let aug: Vec<Vec<Q>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| concat(r, &unit(n, i)))
        .collect();
    let (r, piv) = rref(&aug, 2 * n);
    if piv.len() < n || piv[n - 1] >= n {
        return None;
    }
    Some(r.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Basis of the intersection of two subspaces given by spanning sets.
pub fn subspace_intersection(a: &[Vec<Q>], b: &[Vec<Q>], n: usize) -> Vec<Vec<Q>> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    // x = A α = B β  <=>  [A, -B] (α, β) = 0
    let ka = a.len();
    let cols: Vec<Vec<Q>> = a.iter().cloned().chain(b.iter().map(|v| neg(v))).collect();
    let sys = transpose(&cols, n);
    let ns = nullspace(&sys, cols.len());
    let vecs: Vec<Vec<Q>> = ns
        .iter()
        .map(|c| {
            let mut x = zeros(n);
            for (ci, v) in c[..ka].iter().zip(a) {
                for (xj, vj) in x.iter_mut().zip(v) {
                    *xj += ci * vj;
                }
            }
            x
        })
        .collect();
    rref(&vecs, n).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nullspace_of_rank_one() {
        let ns = nullspace(&[qvec(&[1, 1, 0])], 3);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            assert!(dot(&qvec(&[1, 1, 0]), v).is_zero());
        }
    }

    #[test]
    fn inverse_roundtrip() {
        let a = vec![qvec(&[2, 1]), qvec(&[1, 1])];
        let inv = inverse(&a).unwrap();
        assert_eq!(mat_mul(&a, &inv, 2), identity(2));
        assert!(inverse(&[qvec(&[1, 2]), qvec(&[2, 4])]).is_none());
    }

    #[test]
    fn solve_inconsistent() {
        let a = vec![qvec(&[1, 1]), qvec(&[2, 2])];
        assert!(solve(&a, &qvec(&[1, 3]), 2).is_none());
        let x = solve(&a, &qvec(&[1, 2]), 2).unwrap();
        assert_eq!(mat_vec(&a, &x), qvec(&[1, 2]));
    }

    #[test]
    fn intersection_of_planes() {
        let a = vec![qvec(&[1, 0, 0]), qvec(&[0, 1, 0])];
        let b = vec![qvec(&[0, 1, 0]), qvec(&[0, 0, 1])];
        assert_eq!(subspace_intersection(&a, &b, 3), vec![qvec(&[0, 1, 0])]);
    }
}
