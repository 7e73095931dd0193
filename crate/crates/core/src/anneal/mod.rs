//! Simulated-annealing search over fixed-shape DNF candidates.
//!
//! The search space `X(k)` holds exactly `d` cubes of exactly `c`
//! predicates, with nonzero coefficient vectors of ∞-norm at most `k` and
//! constants bounded by `k'`. Neighbors differ in one coordinate of one
//! predicate by ±1.

mod board;
mod cost;
mod search;

pub use board::{Board, NeverStop, StopSignal};
pub use cost::{cost, delta_approx, normalizer, Cost, CostModel};
pub use search::{
    bounded_random_walk, initial_invariant, initial_temperature, legal_moves, metropolis_accept,
    parallel_sa, sample_neighbor, simulated_annealing, Move, ParallelOutcome, SaOutcome, Telemetry,
    TransitionSample,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lia::{Cube, DnfFormula, LinearPredicate, StateSpace};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnealError {
    #[error("search space needs n, c, d, k >= 1 (got n={n}, c={c}, d={d}, k={k})")]
    InvalidShape {
        n: usize,
        c: usize,
        d: usize,
        k: i64,
    },
    #[error("negating a {d}-cube, {c}-predicate candidate can produce {c}^{d} cubes, above the cap {cap}")]
    NegationTooLarge { c: usize, d: usize, cap: usize },
    #[error("k_list has {k_list} entries but workers = {workers}")]
    WorkerMismatch { workers: usize, k_list: usize },
}

/// Shape and bounds of `X(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpaceParams {
    pub n: usize,
    pub c: usize,
    pub d: usize,
    pub k: i64,
    pub k_prime: i64,
}

impl SearchSpaceParams {
    /// `k' = floor(k·√n·ρ)` with `ρ = √n·(B+1)`, which is exactly `k·n·(B+1)`.
    pub fn new(space: &StateSpace, d: usize, c: usize, k: i64) -> Result<Self, AnnealError> {
        let n = space.dim();
        if c == 0 || d == 0 || k < 1 {
            return Err(AnnealError::InvalidShape { n, c, d, k });
        }
        let k_prime = k
            .saturating_mul(n as i64)
            .saturating_mul(space.int_bound().saturating_add(1));
        Ok(Self {
            n,
            c,
            d,
            k,
            k_prime,
        })
    }

    /// Rejects shapes whose negation could exceed `cap` cubes.
    pub fn check_negation(&self, cap: usize) -> Result<(), AnnealError> {
        let bound = (self.c as u128)
            .checked_pow(self.d as u32)
            .unwrap_or(u128::MAX);
        if bound > cap as u128 {
            return Err(AnnealError::NegationTooLarge {
                c: self.c,
                d: self.d,
                cap,
            });
        }
        Ok(())
    }

    pub fn with_k(&self, k: i64, space: &StateSpace) -> Self {
        Self::new(space, self.d, self.c, k).expect("shape already validated")
    }

    /// Upper bound on the neighborhood size, `cd(2n+2)`.
    pub fn max_moves(&self) -> usize {
        self.c * self.d * (2 * self.n + 2)
    }
}

/// A point of `X(k)`: `d` cubes of `c` predicates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CandidateInvariant {
    pub n: usize,
    pub cubes: Vec<Vec<LinearPredicate>>,
}

impl CandidateInvariant {
    pub fn new(n: usize, cubes: Vec<Vec<LinearPredicate>>) -> Self {
        Self { n, cubes }
    }

    pub fn d(&self) -> usize {
        self.cubes.len()
    }

    pub fn c(&self) -> usize {
        self.cubes.first().map_or(0, Vec::len)
    }

    pub fn to_dnf(&self) -> DnfFormula {
        DnfFormula::new(
            self.n,
            self.cubes.iter().map(|c| Cube::new(c.clone())).collect(),
        )
        .expect("candidate predicates have dimension n")
    }

    /// `c^d`, the largest possible negation.
    pub fn negation_bound(&self) -> usize {
        (self.c() as u128)
            .checked_pow(self.d() as u32)
            .map_or(usize::MAX, |v| v.min(usize::MAX as u128) as usize)
    }

    /// Membership in `X(k)` for the given bounds.
    pub fn is_valid(&self, params: &SearchSpaceParams) -> bool {
        self.cubes.len() == params.d
            && self.cubes.iter().all(|cube| {
                cube.len() == params.c
                    && cube.iter().all(|p| {
                        p.dim() == params.n
                            && !p.is_constant()
                            && p.inf_norm() <= params.k
                            && p.bound.abs() <= params.k_prime
                    })
            })
    }

    /// Projects onto `X(k)` by clamping coefficients and constants.
    pub fn clamped(&self, params: &SearchSpaceParams) -> Self {
        let cubes = self
            .cubes
            .iter()
            .map(|cube| {
                cube.iter()
                    .map(|p| {
                        LinearPredicate::new(
                            p.coeffs
                                .iter()
                                .map(|w| (*w).clamp(-params.k, params.k))
                                .collect(),
                            p.bound.clamp(-params.k_prime, params.k_prime),
                        )
                    })
                    .collect()
            })
            .collect();
        Self::new(self.n, cubes)
    }
}

/// Annealing hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub t_max: u64,
    pub t_check: u64,
    /// Target acceptance ratio for the initial temperature.
    pub a0: f64,
    /// Tolerance of the initial-temperature fixed point.
    pub eps_t: f64,
    pub t_rw: u64,
    pub l0: u64,
    pub alpha: f64,
    pub beta: f64,
    pub workers: usize,
    pub k_list: Vec<i64>,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            t_max: 200_000,
            t_check: 1_000,
            a0: 0.35,
            eps_t: 1e-3,
            t_rw: 500,
            l0: 32,
            alpha: 50.0,
            beta: 2.0,
            workers: 4,
            k_list: vec![1, 2, 3, 5],
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<(), AnnealError> {
        if self.workers != self.k_list.len() {
            return Err(AnnealError::WorkerMismatch {
                workers: self.workers,
                k_list: self.k_list.len(),
            });
        }
        Ok(())
    }
}
