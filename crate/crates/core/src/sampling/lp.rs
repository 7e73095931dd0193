//! Exact two-phase simplex over rationals with Bland's rule.
//!
//! Only what bounding boxes need: per-coordinate minima and maxima of a
//! polyhedron `{x : A x <= b}` with free variables.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

type Q = BigRational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Bound {
    Finite(Q),
    Unbounded,
}

struct Tableau {
    /// Rows of `[coefficients | rhs]`.
    rows: Vec<Vec<Q>>,
    basis: Vec<usize>,
    ncols: usize,
    banned: Vec<bool>,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let inv = Q::one() / &self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v = &*v * &inv;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v = &*v - &f * p;
                }
            }
        }
        self.basis[r] = c;
    }

    fn rhs(&self, r: usize) -> &Q {
        &self.rows[r][self.ncols]
    }

    /// Maximizes `obj · vars`.
    fn optimize(&mut self, obj: &[Q]) -> Outcome {
        loop {
            let mut entering = None;
            for j in 0..self.ncols {
                if self.banned[j] || self.basis.contains(&j) {
                    continue;
                }
                let mut reduced = obj[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    if !obj[b].is_zero() && !self.rows[i][j].is_zero() {
                        reduced -= &obj[b] * &self.rows[i][j];
                    }
                }
                if reduced.is_positive() {
                    entering = Some(j);
                    break;
                }
            }
            let Some(c) = entering else {
                return Outcome::Optimal;
            };
            let mut leave: Option<(usize, Q)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][c];
                if !a.is_positive() {
                    continue;
                }
                let ratio = self.rhs(i) / a;
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => {
                        ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, c),
                None => return Outcome::Unbounded,
            }
        }
    }

    fn objective_value(&self, obj: &[Q]) -> Q {
        self.basis
            .iter()
            .enumerate()
            .map(|(i, &b)| &obj[b] * self.rhs(i))
            .sum()
    }
}

/// A feasible starting tableau for `{x : A x <= b}` with free `x`, or `None`
/// when the polyhedron is empty.
pub struct Polyhedron {
    dim: usize,
    tableau: Tableau,
}

impl Polyhedron {
    pub fn new(a: &[Vec<i64>], b: &[i64], dim: usize) -> Option<Self> {
        let a: Vec<Vec<Q>> = a
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&v| Q::from_integer(BigInt::from(v)))
                    .collect()
            })
            .collect();
        let b: Vec<Q> = b
            .iter()
            .map(|&v| Q::from_integer(BigInt::from(v)))
            .collect();
        Self::new_rational(&a, &b, dim)
    }

    pub fn new_rational(a: &[Vec<Q>], b: &[Q], dim: usize) -> Option<Self> {
        let m = a.len();
        // Columns: x+ (dim), x- (dim), slack (m), artificial (one per negative rhs).
        let negative: Vec<usize> = (0..m).filter(|&i| b[i].is_negative()).collect();
        let nart = negative.len();
        let ncols = 2 * dim + m + nart;
        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut art = 0;
        for i in 0..m {
            let mut row = vec![Q::zero(); ncols + 1];
            let sign = if b[i].is_negative() {
                -Q::one()
            } else {
                Q::one()
            };
            for j in 0..dim {
                row[j] = &a[i][j] * &sign;
                row[dim + j] = -&a[i][j] * &sign;
            }
            row[2 * dim + i] = sign.clone();
            row[ncols] = &b[i] * &sign;
            if b[i].is_negative() {
                let col = 2 * dim + m + art;
                row[col] = Q::one();
                basis.push(col);
                art += 1;
            } else {
                basis.push(2 * dim + i);
            }
            rows.push(row);
        }
        let mut tableau = Tableau {
            rows,
            basis,
            ncols,
            banned: vec![false; ncols],
        };
        if nart > 0 {
            let mut obj = vec![Q::zero(); ncols];
            for v in obj.iter_mut().skip(2 * dim + m) {
                *v = -Q::one();
            }
            tableau.optimize(&obj);
            if tableau.objective_value(&obj).is_negative() {
                return None;
            }
            // Drive zero-valued artificials out of the basis.
            let first_art = 2 * dim + m;
            let mut r = 0;
            while r < tableau.rows.len() {
                if tableau.basis[r] >= first_art {
                    let col = (0..first_art).find(|&j| !tableau.rows[r][j].is_zero());
                    match col {
                        Some(c) => tableau.pivot(r, c),
                        None => {
                            tableau.rows.remove(r);
                            tableau.basis.remove(r);
                            continue;
                        }
                    }
                }
                r += 1;
            }
            for j in first_art..ncols {
                tableau.banned[j] = true;
            }
        }
        Some(Self { dim, tableau })
    }

    /// Supremum of `c · x`.
    pub fn maximize(&self, c: &[Q]) -> Bound {
        let mut t = Tableau {
            rows: self.tableau.rows.clone(),
            basis: self.tableau.basis.clone(),
            ncols: self.tableau.ncols,
            banned: self.tableau.banned.clone(),
        };
        let mut obj = vec![Q::zero(); t.ncols];
        for j in 0..self.dim {
            obj[j] = c[j].clone();
            obj[self.dim + j] = -c[j].clone();
        }
        match t.optimize(&obj) {
            Outcome::Optimal => Bound::Finite(t.objective_value(&obj)),
            Outcome::Unbounded => Bound::Unbounded,
        }
    }

    /// `(inf x_i, sup x_i)` for every coordinate.
    pub fn axis_bounds(&self) -> Vec<(Bound, Bound)> {
        (0..self.dim)
            .map(|i| {
                let mut e = vec![Q::zero(); self.dim];
                e[i] = Q::one();
                let hi = self.maximize(&e);
                e[i] = -Q::one();
                let lo = match self.maximize(&e) {
                    Bound::Finite(v) => Bound::Finite(-v),
                    Bound::Unbounded => Bound::Unbounded,
                };
                (lo, hi)
            })
            .collect()
    }
}
