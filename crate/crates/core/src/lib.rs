//! Loop-invariant synthesis for single-loop integer programs.
//!
//! A guess-and-check engine: an outer counterexample-guided loop samples
//! datasets from the program's constrained Horn clauses, an inner parallel
//! simulated-annealing search finds a DNF that fits the data, and an SMT
//! solver (or a bounded brute-force oracle) checks the result.

pub mod anneal;
pub mod ir;
pub mod lia;
pub mod sampling;
pub mod solve;
pub mod verify;

pub use lia::{
    apply_transition, dataset_stats, eval_dnf, iterated_tails, negate_dnf, ChcSystem, Cube,
    Dataset, DatasetStats, DnfFormula, LiaError, LinearMap, LinearPredicate, StateSpace,
    StateVector, TransitionBlock, TransitionRelation, DEFAULT_DNF_CAP,
};
pub use solve::{
    default_hyperparameters, merge_cex, solve, solve_observed, IterationRecord, SolveConfig,
    SolveError, SolveOutcome, SolveStatus,
};

pub use num_bigint;
pub use num_rational;
