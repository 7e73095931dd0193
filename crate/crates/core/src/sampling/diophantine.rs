//! Uniform sampling of integer solutions of `A x = B` inside a box.
//!
//! `[Aᵀ : I]` is brought to row echelon form `[H : U]` by unimodular row
//! operations, so `U Aᵀ = H` and every integer solution is
//! `x = x0 + Σ α_j u_j` with `u_j` the rows of `U` below the rank of `H`.
//! Ranges for the `α_j` come from an exact LP over the box; sampling draws
//! `α` uniformly from that integer box and rejects points outside.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::Rng;

use super::lp::{Bound, Polyhedron};
use super::{Hyperrectangle, SamplingError};
use crate::lia::{Cube, LinearPredicate, StateVector};

/// `A x = B` restricted to `box_`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiophantineSystem {
    pub a: Vec<Vec<i64>>,
    pub b: Vec<i64>,
    pub box_: Hyperrectangle,
}

/// Stacks every syntactic pair `(w·x <= b, -w·x <= -b)` of the cube into
/// `A x = B`. Sound but incomplete: a pair whose two sides carry different
/// positive multiples of the same row (`2w·x <= 2b`, `-w·x <= -b`) is missed.
pub fn is_affine_contained(cube: &Cube, box_: &Hyperrectangle) -> Option<DiophantineSystem> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (i, p) in cube.predicates.iter().enumerate() {
        if p.is_constant() || p.coeffs.iter().find(|&&w| w != 0).is_some_and(|&w| w < 0) {
            continue;
        }
        let partner = LinearPredicate::new(p.coeffs.iter().map(|w| -w).collect(), -p.bound);
        if cube
            .predicates
            .iter()
            .enumerate()
            .any(|(j, q)| j != i && *q == partner)
            && !a.contains(&p.coeffs)
        {
            a.push(p.coeffs.clone());
            b.push(p.bound);
        }
    }
    if a.is_empty() {
        return None;
    }
    Some(DiophantineSystem {
        a,
        b,
        box_: box_.clone(),
    })
}

fn overflow() -> SamplingError {
    SamplingError::Overflow
}

fn add(a: i128, b: i128) -> Result<i128, SamplingError> {
    a.checked_add(b).ok_or_else(overflow)
}

fn mul(a: i128, b: i128) -> Result<i128, SamplingError> {
    a.checked_mul(b).ok_or_else(overflow)
}

/// A parametrization `x = x0 + Σ α_j basis[j]` with `α` ranging over an
/// integer box.
#[derive(Debug, Clone)]
pub struct SolutionLattice {
    pub x0: Vec<i128>,
    pub basis: Vec<Vec<i128>>,
    pub alpha_lo: Vec<i128>,
    pub alpha_hi: Vec<i128>,
    box_: Hyperrectangle,
}

impl SolutionLattice {
    pub fn build(sys: &DiophantineSystem) -> Result<Self, SamplingError> {
        let m = sys.a.len();
        let n = sys.box_.lo.len();
        // h = Aᵀ (n × m), u = I (n × n)
        let mut h: Vec<Vec<i128>> = (0..n)
            .map(|i| (0..m).map(|j| sys.a[j][i] as i128).collect())
            .collect();
        let mut u: Vec<Vec<i128>> = (0..n)
            .map(|i| (0..n).map(|j| i128::from(i == j)).collect())
            .collect();
        let mut pivots: Vec<usize> = Vec::new();
        let mut r = 0;
        for col in 0..m {
            if r == n {
                break;
            }
            loop {
                let best = (r..n)
                    .filter(|&i| h[i][col] != 0)
                    .min_by_key(|&i| h[i][col].unsigned_abs());
                let Some(p) = best else { break };
                h.swap(r, p);
                u.swap(r, p);
                let mut done = true;
                for i in r + 1..n {
                    if h[i][col] == 0 {
                        continue;
                    }
                    let f = h[i][col] / h[r][col];
                    for j in 0..m {
                        h[i][j] = add(h[i][j], -mul(f, h[r][j])?)?;
                    }
                    for j in 0..n {
                        u[i][j] = add(u[i][j], -mul(f, u[r][j])?)?;
                    }
                    if h[i][col] != 0 {
                        done = false;
                    }
                }
                if done {
                    break;
                }
            }
            if h[r][col] != 0 {
                pivots.push(col);
                r += 1;
            }
        }
        let rank = r;
        // Hᵀ z = B, forward substitution over pivot rows.
        let mut z = vec![0i128; rank];
        for (i, &col) in pivots.iter().enumerate() {
            let mut rest = sys.b[col] as i128;
            for l in 0..i {
                rest = add(rest, -mul(h[l][col], z[l])?)?;
            }
            if rest % h[i][col] != 0 {
                return Err(SamplingError::NoIntegerSolution);
            }
            z[i] = rest / h[i][col];
        }
        for col in 0..m {
            let mut lhs = 0i128;
            for i in 0..rank {
                lhs = add(lhs, mul(h[i][col], z[i])?)?;
            }
            if lhs != sys.b[col] as i128 {
                return Err(SamplingError::NoIntegerSolution);
            }
        }
        let mut x0 = vec![0i128; n];
        for i in 0..rank {
            for j in 0..n {
                x0[j] = add(x0[j], mul(z[i], u[i][j])?)?;
            }
        }
        let basis: Vec<Vec<i128>> = u[rank..].to_vec();
        let (alpha_lo, alpha_hi) = alpha_ranges(&x0, &basis, &sys.box_)?;
        Ok(Self {
            x0,
            basis,
            alpha_lo,
            alpha_hi,
            box_: sys.box_.clone(),
        })
    }

    pub fn point(&self, alpha: &[i128]) -> Result<Vec<i128>, SamplingError> {
        let mut x = self.x0.clone();
        for (a, v) in alpha.iter().zip(&self.basis) {
            for (xj, vj) in x.iter_mut().zip(v) {
                *xj = add(*xj, mul(*a, *vj)?)?;
            }
        }
        Ok(x)
    }

    /// One draw; `None` when the point falls outside the box.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Option<StateVector>, SamplingError> {
        let alpha: Vec<i128> = self
            .alpha_lo
            .iter()
            .zip(&self.alpha_hi)
            .map(|(&l, &h)| rng.gen_range(l..=h))
            .collect();
        let x = self.point(&alpha)?;
        let inside = x
            .iter()
            .enumerate()
            .all(|(i, &v)| v >= self.box_.lo[i] as i128 && v <= self.box_.hi[i] as i128);
        if !inside {
            return Ok(None);
        }
        Ok(Some(StateVector(x.into_iter().map(|v| v as i64).collect())))
    }
}

fn alpha_ranges(
    x0: &[i128],
    basis: &[Vec<i128>],
    box_: &Hyperrectangle,
) -> Result<(Vec<i128>, Vec<i128>), SamplingError> {
    let n = x0.len();
    let k = basis.len();
    if k == 0 {
        let inside = (0..n).all(|i| x0[i] >= box_.lo[i] as i128 && x0[i] <= box_.hi[i] as i128);
        return if inside {
            Ok((vec![], vec![]))
        } else {
            Err(SamplingError::NoSolutionInBox)
        };
    }
    let q = |v: i128| BigRational::from_integer(BigInt::from(v));
    let mut a = Vec::with_capacity(2 * n);
    let mut b = Vec::with_capacity(2 * n);
    for i in 0..n {
        // lo_i <= x0_i + Σ α_j v_ji <= hi_i
        let row: Vec<BigRational> = basis.iter().map(|v| q(v[i])).collect();
        a.push(row.clone());
        b.push(q(box_.hi[i] as i128 - x0[i]));
        a.push(row.into_iter().map(|v| -v).collect());
        b.push(q(x0[i] - box_.lo[i] as i128));
    }
    let poly = Polyhedron::new_rational(&a, &b, k).ok_or(SamplingError::NoSolutionInBox)?;
    let mut lo = Vec::with_capacity(k);
    let mut hi = Vec::with_capacity(k);
    for (l, h) in poly.axis_bounds() {
        let (Bound::Finite(l), Bound::Finite(h)) = (l, h) else {
            unreachable!("basis rows are independent, so the box bounds every α");
        };
        let l = l.ceil().to_integer().to_i128().ok_or_else(overflow)?;
        let h = h.floor().to_integer().to_i128().ok_or_else(overflow)?;
        if l > h {
            return Err(SamplingError::NoSolutionInBox);
        }
        lo.push(l);
        hi.push(h);
    }
    Ok((lo, hi))
}

/// One uniform draw from the in-box integer solutions of `sys`.
pub fn diophantine_sample<R: Rng + ?Sized>(
    sys: &DiophantineSystem,
    rng: &mut R,
    budget: u64,
) -> Result<StateVector, SamplingError> {
    let lattice = SolutionLattice::build(sys)?;
    for _ in 0..budget {
        if let Some(x) = lattice.draw(rng)? {
            return Ok(x);
        }
    }
    Err(SamplingError::RetryBudget {
        draws: budget,
        proven_empty: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square(lo: i64, hi: i64) -> Hyperrectangle {
        Hyperrectangle {
            lo: vec![lo, lo],
            hi: vec![hi, hi],
        }
    }

    #[test]
    fn x_plus_y_is_four() {
        let sys = DiophantineSystem {
            a: vec![vec![1, 1]],
            b: vec![4],
            box_: square(0, 4),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let s = diophantine_sample(&sys, &mut rng, 1000).unwrap();
            assert_eq!(s.0[0] + s.0[1], 4);
            assert!(s.0.iter().all(|&v| (0..=4).contains(&v)));
        }
    }

    #[test]
    fn parity_has_no_solution() {
        let sys = DiophantineSystem {
            a: vec![vec![2]],
            b: vec![3],
            box_: Hyperrectangle {
                lo: vec![-10],
                hi: vec![10],
            },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            diophantine_sample(&sys, &mut rng, 10),
            Err(SamplingError::NoIntegerSolution)
        );
    }

    #[test]
    fn unique_point() {
        let sys = DiophantineSystem {
            a: vec![vec![1, 0], vec![0, 1]],
            b: vec![1, 1],
            box_: square(-5, 5),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(
            diophantine_sample(&sys, &mut rng, 10).unwrap(),
            StateVector(vec![1, 1])
        );
    }

    #[test]
    fn solution_outside_box() {
        let sys = DiophantineSystem {
            a: vec![vec![1, 1]],
            b: vec![40],
            box_: square(0, 4),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(
            diophantine_sample(&sys, &mut rng, 10),
            Err(SamplingError::NoSolutionInBox)
        );
    }

    #[test]
    fn three_dim_plane() {
        // 2x + 3y - z = 1 in [-6, 6]^3
        let sys = DiophantineSystem {
            a: vec![vec![2, 3, -1]],
            b: vec![1],
            box_: Hyperrectangle {
                lo: vec![-6; 3],
                hi: vec![6; 3],
            },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let s = diophantine_sample(&sys, &mut rng, 10_000).unwrap();
            assert_eq!(2 * s.0[0] + 3 * s.0[1] - s.0[2], 1);
        }
    }

    #[test]
    fn syntactic_pair_detection() {
        let p = |c: &[i64], b| LinearPredicate::new(c.to_vec(), b);
        let b = square(-10, 10);
        let cube = Cube::new(vec![
            p(&[1, 1], 4),
            p(&[-1, -1], -4),
            p(&[1, 0], 4),
            p(&[-1, 0], 0),
        ]);
        let sys = is_affine_contained(&cube, &b).unwrap();
        assert_eq!(sys.a, vec![vec![1, 1]]);
        assert_eq!(sys.b, vec![4]);
        assert!(is_affine_contained(&Cube::new(vec![p(&[1, 0], 4), p(&[-1, 0], 0)]), &b).is_none());
        let scaled = Cube::new(vec![p(&[2, 2], 8), p(&[-2, -2], -8)]);
        assert!(is_affine_contained(&scaled, &b).is_some());
        let mismatched = Cube::new(vec![p(&[2, 2], 8), p(&[-1, -1], -4)]);
        assert!(is_affine_contained(&mismatched, &b).is_none());
    }
}
