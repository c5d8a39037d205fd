//! Dense two-phase simplex over exact rationals.
//!
//! Solves `max c.x  s.t.  A x = b, x >= 0` with Bland's least-index rule for
//! both the entering and the leaving variable, so it cannot cycle.

use crate::error::{Error, Result};
use crate::rational::Rational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum LpOutcome {
    Infeasible,
    Optimal { x: Vec<Rational>, value: Rational },
}

struct Tableau {
    /// `rows[i]` holds the row coefficients followed by the right-hand side.
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    /// Reduced costs for maximization, followed by minus the objective value.
    reduced: Vec<Rational>,
    cols: usize,
}

enum Step {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, i: usize) -> &Rational {
        &self.rows[i][self.cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let inv = self.rows[row][col]
            .recip()
            .expect("pivot element is nonzero");
        for v in self.rows[row].iter_mut() {
            if !v.is_zero() {
                *v = &*v * &inv;
            }
        }
        let pivot_row = self.rows[row].clone();
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i == row || r[col].is_zero() {
                continue;
            }
            let factor = r[col].clone();
            for (v, p) in r.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v -= &(&factor * p);
                }
            }
        }
        if !self.reduced[col].is_zero() {
            let factor = self.reduced[col].clone();
            for (v, p) in self.reduced.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v -= &(&factor * p);
                }
            }
        }
        self.basis[row] = col;
    }

    /// Runs simplex iterations restricted to columns in `allowed`.
    fn optimize(&mut self, allowed: usize) -> Step {
        loop {
            let Some(enter) = (0..allowed).find(|&j| self.reduced[j].is_positive()) else {
                return Step::Optimal;
            };
            let mut leave: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][enter];
                if !a.is_positive() {
                    continue;
                }
                let ratio = self.rhs(i) / a;
                let better = match &leave {
                    None => true,
                    Some((best_i, best)) => {
                        ratio < *best || (ratio == *best && self.basis[i] < self.basis[*best_i])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            match leave {
                None => return Step::Unbounded,
                Some((row, _)) => self.pivot(row, enter),
            }
        }
    }
}

/// Phase one: returns a tableau with a feasible basis over the original
/// columns (artificial columns removed), or `None` if infeasible.
fn phase_one(a: &[Vec<Rational>], b: &[Rational]) -> Result<Option<Tableau>> {
    let n_rows = a.len();
    let n_vars = a.first().map_or(0, Vec::len);
    let cols = n_vars + n_rows;
    let mut rows = Vec::with_capacity(n_rows);
    for (i, (row, rhs)) in a.iter().zip(b).enumerate() {
        if row.len() != n_vars {
            return Err(Error::InternalLogic("ragged constraint matrix".into()));
        }
        let flip = rhs.is_negative();
        let mut r: Vec<Rational> = row
            .iter()
            .map(|v| if flip { -v } else { v.clone() })
            .collect();
        r.extend((0..n_rows).map(|k| if k == i { Rational::one() } else { Rational::zero() }));
        r.push(if flip { -rhs } else { rhs.clone() });
        rows.push(r);
    }
    // maximize -(sum of artificials)
    let mut reduced = vec![Rational::zero(); cols + 1];
    for r in &rows {
        for j in 0..n_vars {
            reduced[j] += &r[j];
        }
        reduced[cols] += &r[cols];
    }
    let mut t = Tableau {
        rows,
        basis: (n_vars..cols).collect(),
        reduced,
        cols,
    };
    if let Step::Unbounded = t.optimize(n_vars) {
        return Err(Error::InternalLogic("phase one reported unbounded".into()));
    }
    // remaining artificial mass = -objective = reduced[cols]
    if !t.reduced[cols].is_zero() {
        return Ok(None);
    }
    // drive zero-level artificials out of the basis, dropping redundant rows
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= n_vars {
            match (0..n_vars).find(|&j| !t.rows[i][j].is_zero()) {
                Some(j) => t.pivot(i, j),
                None => {
                    t.rows.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }
    for r in t.rows.iter_mut() {
        let rhs = r[cols].clone();
        r.truncate(n_vars);
        r.push(rhs);
    }
    t.cols = n_vars;
    t.reduced = vec![Rational::zero(); n_vars + 1];
    Ok(Some(t))
}

pub(crate) fn feasible_point(a: &[Vec<Rational>], b: &[Rational]) -> Result<Option<Vec<Rational>>> {
    Ok(phase_one(a, b)?.map(|t| extract(&t)))
}

fn extract(t: &Tableau) -> Vec<Rational> {
    let mut x = vec![Rational::zero(); t.cols];
    for (i, &j) in t.basis.iter().enumerate() {
        x[j] = t.rhs(i).clone();
    }
    x
}

pub(crate) fn maximize(a: &[Vec<Rational>], b: &[Rational], c: &[Rational]) -> Result<LpOutcome> {
    let Some(mut t) = phase_one(a, b)? else {
        return Ok(LpOutcome::Infeasible);
    };
    if c.len() != t.cols {
        return Err(Error::InternalLogic("objective length mismatch".into()));
    }
    let cols = t.cols;
    let mut reduced: Vec<Rational> = c.to_vec();
    reduced.push(Rational::zero());
    for (i, &bj) in t.basis.iter().enumerate() {
        let cb = &c[bj];
        if cb.is_zero() {
            continue;
        }
        for (v, p) in reduced.iter_mut().zip(&t.rows[i]) {
            if !p.is_zero() {
                *v -= &(cb * p);
            }
        }
    }
    t.reduced = reduced;
    match t.optimize(cols) {
        Step::Unbounded => Err(Error::InternalLogic("LP unbounded over a bounded polytope".into())),
        Step::Optimal => {
            let x = extract(&t);
            let value = c.iter().zip(&x).map(|(c, x)| c * x).sum();
            Ok(LpOutcome::Optimal { x, value })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    #[test]
    fn small_lp() {
        // max x + y  s.t. x + 2y + s1 = 4, 3x + y + s2 = 6
        let a = vec![
            vec![q(1), q(2), q(1), q(0)],
            vec![q(3), q(1), q(0), q(1)],
        ];
        let b = vec![q(4), q(6)];
        let c = vec![q(1), q(1), q(0), q(0)];
        match maximize(&a, &b, &c).unwrap() {
            LpOutcome::Optimal { x, value } => {
                assert_eq!(value, Rational::ratio(14, 5));
                assert_eq!(x[0], Rational::ratio(8, 5));
                assert_eq!(x[1], Rational::ratio(6, 5));
            }
            LpOutcome::Infeasible => panic!("feasible"),
        }
    }

    #[test]
    fn infeasible_lp() {
        // x + y = 1, x + y - s = 2
        let a = vec![vec![q(1), q(1), q(0)], vec![q(1), q(1), q(-1)]];
        let b = vec![q(1), q(2)];
        assert_eq!(feasible_point(&a, &b).unwrap(), None);
    }

    #[test]
    fn redundant_rows_are_dropped() {
        let a = vec![vec![q(1), q(1)], vec![q(2), q(2)]];
        let b = vec![q(1), q(2)];
        match maximize(&a, &b, &[q(0), q(1)]).unwrap() {
            LpOutcome::Optimal { x, .. } => assert_eq!(x, vec![q(0), q(1)]),
            LpOutcome::Infeasible => panic!("feasible"),
        }
    }

    #[test]
    fn negative_rhs_is_normalized() {
        // -x - y = -1
        let a = vec![vec![q(-1), q(-1)]];
        let b = vec![q(-1)];
        assert!(feasible_point(&a, &b).unwrap().is_some());
    }
}
