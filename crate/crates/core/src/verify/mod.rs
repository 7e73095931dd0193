//! The check phase: clause validity by SMT or by enumeration, dispersed
//! counterexamples, and iterated implication pairs.

pub mod smt;

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lia::{
    apply_transition, ChcSystem, DnfFormula, StateSpace, StateVector, TransitionRelation,
};
pub use smt::{encode_clause, CheckResult, Solver, SolverConfig, SolverMode};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("solver timed out after {ms} ms")]
    Timeout { ms: u64 },
    #[error("solver protocol error: {message}")]
    Protocol { message: String },
    #[error("solver I/O error: {0}")]
    Io(String),
    #[error("could not start solver `{path}`: {message}")]
    Spawn { path: String, message: String },
    #[error("state box has {size} states, above the oracle limit {limit}")]
    BoxTooLarge { size: u128, limit: u128 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClauseKind {
    Fact,
    Inductive,
    Query,
}

impl ClauseKind {
    pub const ALL: [ClauseKind; 3] = [ClauseKind::Fact, ClauseKind::Inductive, ClauseKind::Query];

    pub fn label(self) -> &'static str {
        match self {
            ClauseKind::Fact => "fact",
            ClauseKind::Inductive => "inductive",
            ClauseKind::Query => "query",
        }
    }
}

impl fmt::Display for ClauseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierConfig {
    /// Counterexamples harvested per clause.
    pub cex_max: usize,
    /// L1 dispersion radius.
    pub d0: u64,
    /// Iterated-pair depth.
    pub k0: usize,
    pub solver_timeout_ms: u64,
    /// Largest box the brute-force oracle will enumerate.
    pub oracle_limit: u128,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        Self {
            cex_max: 5,
            d0: 5,
            k0: 3,
            solver_timeout_ms: 30_000,
            oracle_limit: 20_000_000,
        }
    }
}

/// Counterexamples to the three clauses.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CexDataset {
    pub plus_cex: BTreeSet<StateVector>,
    pub ice_cex: BTreeSet<(StateVector, StateVector)>,
    pub minus_cex: BTreeSet<StateVector>,
}

impl CexDataset {
    pub fn is_empty(&self) -> bool {
        self.plus_cex.is_empty() && self.ice_cex.is_empty() && self.minus_cex.is_empty()
    }

    pub fn len(&self) -> usize {
        self.plus_cex.len() + self.ice_cex.len() + self.minus_cex.len()
    }
}

/// One counterexample: a state, or a head/tail pair for the inductive clause.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cex {
    State(StateVector),
    Pair(StateVector, StateVector),
}

impl Cex {
    /// The state used for dispersion.
    pub fn anchor(&self) -> &StateVector {
        match self {
            Cex::State(s) | Cex::Pair(s, _) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClauseResult {
    pub valid: bool,
    pub cex: Vec<Cex>,
}

/// Checks one clause with the solver and harvests up to `cex_max`
/// counterexamples, each at L1 distance at least `d0` from the previous
/// ones (heads only for the inductive clause).
pub fn chc_verify_clause(
    kind: ClauseKind,
    inv: &DnfFormula,
    sys: &ChcSystem,
    cfg: &VerifierConfig,
    solver: &mut Solver,
) -> Result<ClauseResult, VerifyError> {
    let n = sys.dim();
    let s = smt::state_names(n);
    let sp = smt::primed_names(n);
    solver.begin()?;
    let result = (|| {
        solver.send(&smt::encode_clause_body(kind, inv, sys))?;
        let mut cex = Vec::new();
        while cex.len() < cfg.cex_max {
            if solver.check_sat()? == CheckResult::Unsat {
                break;
            }
            let head = StateVector(solver.get_values(&s)?);
            let found = if kind == ClauseKind::Inductive {
                Cex::Pair(head.clone(), StateVector(solver.get_values(&sp)?))
            } else {
                Cex::State(head.clone())
            };
            cex.push(found);
            if cex.len() < cfg.cex_max {
                let tag = format!("disp{}", cex.len());
                solver.send(&smt::dispersion(&s, &head, cfg.d0, &tag))?;
            }
        }
        Ok(ClauseResult {
            valid: cex.is_empty(),
            cex,
        })
    })();
    solver.end(kind.label());
    result
}

/// Extends each pair's tail by up to `k0 - 1` random guarded steps.
///
/// At each step a tail of the current state is chosen uniformly; the walk
/// stops before moving when the state has no tail or the chosen tail leaves
/// the guard. The returned tail may itself lie outside the guard only if it
/// was the original tail.
pub fn iterated_implication_pairs<R: Rng + ?Sized>(
    trans: &TransitionRelation,
    space: &StateSpace,
    guard: &DnfFormula,
    ice: &[(StateVector, StateVector)],
    k0: usize,
    rng: &mut R,
) -> Vec<(StateVector, StateVector)> {
    ice.iter()
        .map(|(head, tail)| {
            let mut current = tail.clone();
            for _ in 1..k0 {
                let tails: Vec<StateVector> = apply_transition(trans, space, &current)
                    .tails
                    .into_iter()
                    .collect();
                if tails.is_empty() {
                    break;
                }
                let next = tails[rng.gen_range(0..tails.len())].clone();
                if !guard.holds(next.coords()) {
                    break;
                }
                current = next;
            }
            (head.clone(), current)
        })
        .collect()
}

fn collect(results: &[(ClauseKind, Vec<Cex>)]) -> CexDataset {
    let mut out = CexDataset::default();
    for (kind, cex) in results {
        for c in cex {
            match (kind, c) {
                (ClauseKind::Fact, Cex::State(s)) => {
                    out.plus_cex.insert(s.clone());
                }
                (ClauseKind::Query, Cex::State(s)) => {
                    out.minus_cex.insert(s.clone());
                }
                (ClauseKind::Inductive, Cex::Pair(h, t)) => {
                    out.ice_cex.insert((h.clone(), t.clone()));
                }
                _ => unreachable!("clause and counterexample shapes agree"),
            }
        }
    }
    out
}

fn augment_ice<R: Rng + ?Sized>(
    sys: &ChcSystem,
    cfg: &VerifierConfig,
    cex: &mut CexDataset,
    rng: &mut R,
) {
    if cex.ice_cex.is_empty() || cfg.k0 <= 1 {
        return;
    }
    let ice: Vec<_> = cex.ice_cex.iter().cloned().collect();
    let iterated =
        iterated_implication_pairs(&sys.trans, &sys.space, &sys.guard, &ice, cfg.k0, rng);
    cex.ice_cex.extend(iterated);
}

/// Checks fact, inductive and query clauses in that order. Inductive
/// counterexamples are augmented with iterated pairs.
pub fn verifier<R: Rng + ?Sized>(
    inv: &DnfFormula,
    sys: &ChcSystem,
    cfg: &VerifierConfig,
    solver: &mut Solver,
    rng: &mut R,
) -> Result<(bool, CexDataset), VerifyError> {
    let mut results = Vec::with_capacity(3);
    for kind in ClauseKind::ALL {
        let r = chc_verify_clause(kind, inv, sys, cfg, solver)?;
        log::debug!("{kind} clause: valid = {}, {} cex", r.valid, r.cex.len());
        results.push((kind, r.cex));
    }
    let correct = results.iter().all(|(_, c)| c.is_empty());
    let mut cex = collect(&results);
    augment_ice(sys, cfg, &mut cex, rng);
    Ok((correct, cex))
}

fn check_box(space: &StateSpace, cfg: &VerifierConfig) -> Result<(), VerifyError> {
    let size = space.cardinality();
    if size > cfg.oracle_limit {
        return Err(VerifyError::BoxTooLarge {
            size,
            limit: cfg.oracle_limit,
        });
    }
    Ok(())
}

/// Every counterexample of one clause, by enumeration of the box.
/// Inductive heads range over `box ∩ B` with tails from the transition maps.
pub fn brute_force_clause(
    kind: ClauseKind,
    inv: &DnfFormula,
    sys: &ChcSystem,
    cfg: &VerifierConfig,
) -> Result<Vec<Cex>, VerifyError> {
    check_box(&sys.space, cfg)?;
    let mut out = Vec::new();
    for s in sys.space.points() {
        let x = s.coords();
        match kind {
            ClauseKind::Fact => {
                if sys.pre.holds(x) && !inv.holds(x) {
                    out.push(Cex::State(s));
                }
            }
            ClauseKind::Inductive => {
                if inv.holds(x) && sys.guard.holds(x) {
                    for t in apply_transition(&sys.trans, &sys.space, &s).tails {
                        if !inv.holds(t.coords()) {
                            out.push(Cex::Pair(s.clone(), t));
                        }
                    }
                }
            }
            ClauseKind::Query => {
                if inv.holds(x) && !sys.post.holds(x) {
                    out.push(Cex::State(s));
                }
            }
        }
    }
    Ok(out)
}

/// Exhaustive check of all three clauses with complete counterexample sets.
pub fn brute_force_verify(
    inv: &DnfFormula,
    sys: &ChcSystem,
    cfg: &VerifierConfig,
) -> Result<(bool, CexDataset), VerifyError> {
    let mut results = Vec::with_capacity(3);
    for kind in ClauseKind::ALL {
        results.push((kind, brute_force_clause(kind, inv, sys, cfg)?));
    }
    let correct = results.iter().all(|(_, c)| c.is_empty());
    Ok((correct, collect(&results)))
}

/// Greedy dispersed subset: shuffled order, keep a counterexample when its
/// anchor is at L1 distance at least `d0` from every kept anchor.
pub fn select_dispersed<R: Rng + ?Sized>(
    mut cex: Vec<Cex>,
    cex_max: usize,
    d0: u64,
    rng: &mut R,
) -> Vec<Cex> {
    cex.shuffle(rng);
    let mut kept: Vec<Cex> = Vec::new();
    for c in cex {
        if kept.len() == cex_max {
            break;
        }
        if kept
            .iter()
            .all(|k| k.anchor().l1_distance(c.anchor()) >= d0 as i128)
        {
            kept.push(c);
        }
    }
    kept
}

/// Verdict of a checker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub correct: bool,
    pub cex: CexDataset,
}

/// The check half of the loop.
pub trait InvariantChecker {
    fn check(
        &mut self,
        inv: &DnfFormula,
        sys: &ChcSystem,
        rng: &mut dyn RngCore,
    ) -> Result<Verdict, VerifyError>;

    fn name(&self) -> &'static str;
}

/// Checks with an external SMT solver.
pub struct SmtChecker {
    pub solver: Solver,
    pub cfg: VerifierConfig,
}

impl SmtChecker {
    pub fn new(solver_cfg: SolverConfig, cfg: VerifierConfig) -> Self {
        Self {
            solver: Solver::new(solver_cfg),
            cfg,
        }
    }
}

impl InvariantChecker for SmtChecker {
    fn check(
        &mut self,
        inv: &DnfFormula,
        sys: &ChcSystem,
        rng: &mut dyn RngCore,
    ) -> Result<Verdict, VerifyError> {
        let (correct, cex) = verifier(inv, sys, &self.cfg, &mut self.solver, rng)?;
        Ok(Verdict { correct, cex })
    }

    fn name(&self) -> &'static str {
        "smt"
    }
}

/// Checks by enumeration, returning a dispersed subset of the complete
/// counterexample sets so the loop sees the same volume of feedback as with
/// a solver.
pub struct OracleChecker {
    pub cfg: VerifierConfig,
}

impl InvariantChecker for OracleChecker {
    fn check(
        &mut self,
        inv: &DnfFormula,
        sys: &ChcSystem,
        rng: &mut dyn RngCore,
    ) -> Result<Verdict, VerifyError> {
        let mut results = Vec::with_capacity(3);
        for kind in ClauseKind::ALL {
            let all = brute_force_clause(kind, inv, sys, &self.cfg)?;
            results.push((
                kind,
                select_dispersed(all, self.cfg.cex_max, self.cfg.d0, rng),
            ));
        }
        let correct = results.iter().all(|(_, c)| c.is_empty());
        let mut cex = collect(&results);
        augment_ice(sys, &self.cfg, &mut cex, rng);
        Ok(Verdict { correct, cex })
    }

    fn name(&self) -> &'static str {
        "oracle"
    }
}
