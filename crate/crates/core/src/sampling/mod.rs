//! Lattice-point sampling, ε-net sizing, and dataset construction.

mod diophantine;
pub mod lp;
mod net;

pub use diophantine::{
    diophantine_sample, is_affine_contained, DiophantineSystem, SolutionLattice,
};
pub use net::{ellipsoid_vc, epsilon_net_size, phi, NetParams};

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lia::{
    apply_transition, negate_dnf, BoxPoints, ChcSystem, Cube, Dataset, DnfFormula, LiaError,
    StateSpace, StateVector,
};
use lp::{Bound, Polyhedron};

/// Draws allowed per sample before giving up on a low-density region.
pub const DEFAULT_RETRY_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SamplingError {
    #[error("linear Diophantine system has no integer solution")]
    NoIntegerSolution,
    #[error("linear Diophantine system has no solution inside the box")]
    NoSolutionInBox,
    #[error(
        "retry budget exhausted after {draws} draws (acceptance rate estimate 0{})",
        if *proven_empty { "; region proven empty" } else { "" }
    )]
    RetryBudget { draws: u64, proven_empty: bool },
    #[error("integer overflow in lattice arithmetic")]
    Overflow,
    #[error(transparent)]
    Lia(#[from] LiaError),
}

impl SamplingError {
    /// True when the region is known to contain no lattice point.
    pub fn is_empty_region(&self) -> bool {
        matches!(
            self,
            SamplingError::NoIntegerSolution
                | SamplingError::NoSolutionInBox
                | SamplingError::RetryBudget {
                    proven_empty: true,
                    ..
                }
        )
    }
}

/// An axis-aligned integer box `lo <= x <= hi`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperrectangle {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl Hyperrectangle {
    pub fn of_space(space: &StateSpace) -> Self {
        Self {
            lo: vec![space.lo(); space.dim()],
            hi: vec![space.hi(); space.dim()],
        }
    }

    /// Number of lattice points, saturating.
    pub fn cardinality(&self) -> u128 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| (h as i128 - l as i128 + 1).max(0) as u128)
            .fold(1u128, |acc, w| acc.saturating_mul(w))
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| l <= v && v <= h)
    }

    pub fn points(&self) -> BoxPoints {
        BoxPoints::new(self.lo.clone(), self.hi.clone())
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> StateVector {
        StateVector(
            self.lo
                .iter()
                .zip(&self.hi)
                .map(|(&l, &h)| rng.gen_range(l..=h))
                .collect(),
        )
    }
}

/// Smallest integer box containing every lattice point of `cube ∩ space`.
///
/// Solves `2n` exact LPs over the rational relaxation (box rows included)
/// and rounds inward. Returns `None` when the relaxation is infeasible or
/// the rounded box is empty.
pub fn bounding_box(cube: &Cube, space: &StateSpace) -> Option<Hyperrectangle> {
    let n = space.dim();
    let mut a: Vec<Vec<i64>> = cube.predicates.iter().map(|p| p.coeffs.clone()).collect();
    let mut b: Vec<i64> = cube.predicates.iter().map(|p| p.bound).collect();
    for i in 0..n {
        let mut e = vec![0; n];
        e[i] = 1;
        a.push(e.clone());
        b.push(space.hi());
        e[i] = -1;
        a.push(e);
        b.push(-space.lo());
    }
    let poly = Polyhedron::new(&a, &b, n)?;
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for (l, h) in poly.axis_bounds() {
        let l = match l {
            Bound::Finite(v) => ceil_i64(&v).max(space.lo()),
            Bound::Unbounded => space.lo(),
        };
        let h = match h {
            Bound::Finite(v) => floor_i64(&v).min(space.hi()),
            Bound::Unbounded => space.hi(),
        };
        if l > h {
            return None;
        }
        lo.push(l);
        hi.push(h);
    }
    Some(Hyperrectangle { lo, hi })
}

fn ceil_i64(v: &BigRational) -> i64 {
    v.ceil().to_integer().to_i64().unwrap_or(i64::MAX)
}

fn floor_i64(v: &BigRational) -> i64 {
    v.floor().to_integer().to_i64().unwrap_or(i64::MIN)
}

#[derive(Debug, Clone)]
enum SamplerMode {
    Rejection(Hyperrectangle),
    Lattice(SolutionLattice),
}

/// A uniform sampler over the lattice points of one cube, prepared once
/// and drawn from many times.
#[derive(Debug, Clone)]
pub struct CubeSampler {
    cube: Cube,
    bbox: Hyperrectangle,
    mode: SamplerMode,
}

impl CubeSampler {
    pub fn new(cube: &Cube, space: &StateSpace) -> Result<Self, SamplingError> {
        let bbox = bounding_box(cube, space).ok_or(SamplingError::RetryBudget {
            draws: 0,
            proven_empty: true,
        })?;
        let mode = match is_affine_contained(cube, &bbox) {
            Some(sys) => SamplerMode::Lattice(SolutionLattice::build(&sys)?),
            None => SamplerMode::Rejection(bbox.clone()),
        };
        Ok(Self {
            cube: cube.clone(),
            bbox,
            mode,
        })
    }

    /// The integer bounding box of the cube.
    pub fn bounding_box(&self) -> &Hyperrectangle {
        &self.bbox
    }

    pub fn uses_lattice(&self) -> bool {
        matches!(self.mode, SamplerMode::Lattice(_))
    }

    /// One uniform sample and the number of draws it took.
    pub fn draw<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        budget: u64,
    ) -> Result<(StateVector, u64), SamplingError> {
        for tries in 1..=budget {
            let candidate = match &self.mode {
                SamplerMode::Rejection(b) => Some(b.draw(rng)),
                SamplerMode::Lattice(l) => l.draw(rng)?,
            };
            if let Some(x) = candidate {
                if self.bbox.contains(x.coords()) && self.cube.holds(x.coords()) {
                    return Ok((x, tries));
                }
            }
        }
        Err(SamplingError::RetryBudget {
            draws: budget,
            proven_empty: false,
        })
    }
}

/// One uniform sample from the lattice points of `cube ∩ space`, with the
/// number of draws used.
pub fn uniform_sample_polytope<R: Rng + ?Sized>(
    cube: &Cube,
    space: &StateSpace,
    rng: &mut R,
    budget: u64,
) -> Result<(StateVector, u64), SamplingError> {
    CubeSampler::new(cube, space)?.draw(rng, budget)
}

/// `draws` uniform samples from every cube of `formula`, deduplicated.
/// Cubes with no lattice point in the box are skipped with a warning.
pub fn sample_per_cube<R: Rng + ?Sized>(
    formula: &DnfFormula,
    draws: u64,
    space: &StateSpace,
    rng: &mut R,
    budget: u64,
) -> Result<BTreeSet<StateVector>, SamplingError> {
    let mut out = BTreeSet::new();
    if draws == 0 {
        return Ok(out);
    }
    for (i, cube) in formula.cubes().iter().enumerate() {
        let sampler = match CubeSampler::new(cube, space) {
            Ok(s) => s,
            Err(e) if e.is_empty_region() => {
                log::warn!("cube {i} has no lattice point in the state box; skipped");
                continue;
            }
            Err(e) => return Err(e),
        };
        for _ in 0..draws {
            out.insert(sampler.draw(rng, budget)?.0);
        }
        log::debug!("cube {i}: {draws} draws");
    }
    Ok(out)
}

/// Union of per-cube ε-nets of `formula`.
pub fn randomized_epsilon_net<R: Rng + ?Sized>(
    formula: &DnfFormula,
    params: &NetParams,
    space: &StateSpace,
    rng: &mut R,
) -> Result<BTreeSet<StateVector>, SamplingError> {
    let m = epsilon_net_size(params);
    sample_per_cube(formula, m, space, rng, DEFAULT_RETRY_BUDGET)
}

fn add_implications(sys: &ChcSystem, heads: &BTreeSet<StateVector>, data: &mut Dataset) {
    for h in heads {
        for t in apply_transition(&sys.trans, &sys.space, h).tails {
            data.implications.insert((h.clone(), t));
        }
    }
}

fn draw_classes<R: Rng + ?Sized>(
    sys: &ChcSystem,
    draws: u64,
    dnf_cap: usize,
    rng: &mut R,
) -> Result<Dataset, SamplingError> {
    let mut data = Dataset::default();
    let budget = DEFAULT_RETRY_BUDGET;
    data.plus = sample_per_cube(&sys.pre, draws, &sys.space, rng, budget)?;
    let heads = sample_per_cube(&sys.guard, draws, &sys.space, rng, budget)?;
    add_implications(sys, &heads, &mut data);
    let not_q = negate_dnf(&sys.post, dnf_cap)?;
    data.minus = sample_per_cube(&not_q, draws, &sys.space, rng, budget)?;
    Ok(data)
}

/// Nets of `P`, `B` (with one transition step per head, all tails kept) and
/// `¬Q` at `(eps0, delta0)`.
pub fn initial_dataset<R: Rng + ?Sized>(
    sys: &ChcSystem,
    eps0: &BigRational,
    delta0: &BigRational,
    dnf_cap: usize,
    rng: &mut R,
) -> Result<Dataset, SamplingError> {
    let m = epsilon_net_size(&NetParams::for_dim(eps0.clone(), delta0.clone(), sys.dim()));
    draw_classes(sys, m, dnf_cap, rng)
}

/// Halves ε and appends the marginal `m(ε/2) - m(ε)` draws per cube.
pub fn refined_dataset<R: Rng + ?Sized>(
    sys: &ChcSystem,
    current_eps: &BigRational,
    delta0: &BigRational,
    existing: &Dataset,
    dnf_cap: usize,
    rng: &mut R,
) -> Result<(Dataset, BigRational), SamplingError> {
    let new_eps = current_eps / BigRational::from_integer(BigInt::from(2));
    let n = sys.dim();
    let before = epsilon_net_size(&NetParams::for_dim(current_eps.clone(), delta0.clone(), n));
    let after = epsilon_net_size(&NetParams::for_dim(new_eps.clone(), delta0.clone(), n));
    let extra = draw_classes(sys, after.saturating_sub(before), dnf_cap, rng)?;
    let mut data = existing.clone();
    data.extend(&extra);
    Ok((data, new_eps))
}

/// `t mod t_refine == 0`.
pub fn refine_criterion(t: u64, t_refine: u64) -> bool {
    t.is_multiple_of(t_refine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lia::{LinearPredicate, DEFAULT_DNF_CAP};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(c: &[i64], b: i64) -> LinearPredicate {
        LinearPredicate::new(c.to_vec(), b)
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn bbox_axis_aligned() {
        let space = StateSpace::new(2, 10).unwrap();
        let cube = Cube::new(vec![
            p(&[1, 0], 2),
            p(&[-1, 0], 0),
            p(&[0, 1], 2),
            p(&[0, -1], 0),
        ]);
        assert_eq!(
            bounding_box(&cube, &space).unwrap(),
            Hyperrectangle {
                lo: vec![0, 0],
                hi: vec![2, 2]
            }
        );
    }

    #[test]
    fn bbox_diagonal_line() {
        let space = StateSpace::new(2, 10).unwrap();
        let cube = Cube::new(vec![p(&[1, 1], 0), p(&[-1, -1], 0)]);
        // x = -y within [-11, 10]² projects onto [-10, 10] on each axis.
        assert_eq!(
            bounding_box(&cube, &space).unwrap(),
            Hyperrectangle {
                lo: vec![-10, -10],
                hi: vec![10, 10]
            }
        );
    }

    #[test]
    fn bbox_contains_enumerated_points() {
        let space = StateSpace::new(2, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let preds = (0..3)
                .map(|_| {
                    p(
                        &[rng.gen_range(-4..=4), rng.gen_range(-4..=4)],
                        rng.gen_range(-10..=10),
                    )
                })
                .collect();
            let cube = Cube::new(preds);
            let members: Vec<_> = space.points().filter(|s| cube.holds(s.coords())).collect();
            match bounding_box(&cube, &space) {
                Some(b) => assert!(members.iter().all(|s| b.contains(s.coords()))),
                None => assert!(members.is_empty()),
            }
        }
    }

    #[test]
    fn empty_cube_is_budget_error() {
        let space = StateSpace::new(1, 10).unwrap();
        let cube = Cube::new(vec![p(&[1], 0), p(&[-1], -1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = uniform_sample_polytope(&cube, &space, &mut rng, 100).unwrap_err();
        assert!(matches!(e, SamplingError::RetryBudget { .. }));
    }

    #[test]
    fn full_box_accepts_first_draw() {
        let space = StateSpace::new(2, 10).unwrap();
        let cube = Cube::new(vec![p(&[0, 0], 0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            assert_eq!(
                uniform_sample_polytope(&cube, &space, &mut rng, 10)
                    .unwrap()
                    .1,
                1
            );
        }
    }

    #[test]
    fn refine_schedule() {
        assert!(refine_criterion(3, 3));
        assert!(!refine_criterion(4, 3));
        for t in 1..10 {
            assert!(refine_criterion(t, t));
        }
    }

    fn toy() -> ChcSystem {
        let doc = crate::ir::parse_chc(
            "(chc (vars x y) (bound 64) (pre (and (= x 1) (= y 1))) (guard true)
              (trans (block true ((x (+ x y)) (y (+ x y))))) (post (>= y 1)))",
        )
        .unwrap();
        crate::ir::lower_document(&doc, DEFAULT_DNF_CAP, 0).unwrap()
    }

    #[test]
    fn toy_initial_dataset() {
        let sys = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data = initial_dataset(&sys, &q(1, 2), &q(9, 10), DEFAULT_DNF_CAP, &mut rng).unwrap();
        assert_eq!(data.plus, [StateVector(vec![1, 1])].into_iter().collect());
        assert!(data.minus.iter().all(|s| s.0[1] <= 0));
        for (h, t) in &data.implications {
            assert!(apply_transition(&sys.trans, &sys.space, h)
                .tails
                .contains(t));
        }
    }

    #[test]
    fn q_true_gives_no_minus() {
        let mut sys = toy();
        sys.post = DnfFormula::truth(2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data = initial_dataset(&sys, &q(1, 2), &q(9, 10), DEFAULT_DNF_CAP, &mut rng).unwrap();
        assert!(data.minus.is_empty());
    }

    #[test]
    fn refinement_appends() {
        let sys = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d0 = initial_dataset(&sys, &q(1, 2), &q(9, 10), DEFAULT_DNF_CAP, &mut rng).unwrap();
        let (d1, eps) =
            refined_dataset(&sys, &q(1, 2), &q(9, 10), &d0, DEFAULT_DNF_CAP, &mut rng).unwrap();
        assert_eq!(eps, q(1, 4));
        assert!(d1.is_superset_of(&d0));
        assert!(d1.minus.len() > d0.minus.len());
    }
}
