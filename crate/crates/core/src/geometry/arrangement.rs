//! Cells of a hyperplane arrangement restricted to a polyhedron.

use num_traits::{Signed, Zero};

use super::polyhedron::Polyhedron;
use super::rational::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Neg,
    Zero,
    Pos,
}

impl Sign {
    pub fn of(x: &Q) -> Sign {
        if x.is_negative() {
            Sign::Neg
        } else if x.is_zero() {
            Sign::Zero
        } else {
            Sign::Pos
        }
    }
}

/// The relatively open set `base ∩ {x : sign(h_j·x − c_j) = signs[j] for all j}`.
#[derive(Clone, Debug)]
pub struct Cell {
    pub signs: Vec<Sign>,
    /// Closure of the cell.
    pub closure: Polyhedron,
    /// A point of the cell.
    pub witness: Vec<Q>,
}

fn constant_sign(p: &Polyhedron, h: &[Q], c: &Q) -> Option<Sign> {
    if p.lineality().iter().any(|l| !dot(h, l).is_zero())
        || p.rays().iter().any(|r| !dot(h, r).is_zero())
    {
        return None;
    }
    let mut vals = p
        .vertices()
        .into_iter()
        .map(|v| Sign::of(&(dot(h, &v) - c)));
    let first = vals.next()?;
    vals.all(|s| s == first).then_some(first)
}

fn strict_ok(x: &[Q], hyperplanes: &[(Vec<Q>, Q)], signs: &[Sign]) -> bool {
    hyperplanes
        .iter()
        .zip(signs)
        .all(|((h, c), s)| *s == Sign::Zero || Sign::of(&(dot(h, x) - c)) == *s)
}

/// Enumerates all nonempty cells. The result is empty iff `base` is.
pub fn cells(base: &Polyhedron, hyperplanes: &[(Vec<Q>, Q)]) -> Vec<Cell> {
    let Some(w) = base.relint_point() else {
        return Vec::new();
    };
    let mut out = vec![Cell {
        signs: Vec::new(),
        closure: base.clone(),
        witness: w,
    }];
    for (j, (h, c)) in hyperplanes.iter().enumerate() {
        let mut next = Vec::new();
        for cell in out {
            if let Some(s) = constant_sign(&cell.closure, h, c) {
                let mut signs = cell.signs;
                signs.push(s);
                next.push(Cell { signs, ..cell });
                continue;
            }
            for s in [Sign::Neg, Sign::Zero, Sign::Pos] {
                let row = match s {
                    Sign::Neg => cell
                        .closure
                        .with_constraints(&[(h.clone(), c.clone())], &[]),
                    Sign::Zero => cell
                        .closure
                        .with_constraints(&[], &[(h.clone(), c.clone())]),
                    Sign::Pos => cell.closure.with_constraints(&[(neg(h), -c)], &[]),
                }
                .expect("consistent dims");
                let Some(w) = row.relint_point() else {
                    continue;
                };
                let mut signs = cell.signs.clone();
                signs.push(s);
                if strict_ok(&w, &hyperplanes[..=j], &signs) {
                    next.push(Cell {
                        signs,
                        closure: row,
                        witness: w,
                    });
                }
            }
        }
        out = next;
    }
    out
}
