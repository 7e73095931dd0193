use loopinv::anneal::{delta_approx, normalizer, CandidateInvariant, CostModel};
use loopinv::ir::{lower_document, parse_chc, parse_formula, to_dnf};
use loopinv::verify::{
    brute_force_verify, chc_verify_clause, ClauseKind, InvariantChecker, OracleChecker, SmtChecker,
    Solver, SolverConfig, VerifierConfig,
};
use loopinv::{
    default_hyperparameters, negate_dnf, solve, ChcSystem, Dataset, DnfFormula, LinearPredicate,
    SolveStatus, StateVector, DEFAULT_DNF_CAP,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOY: &str = include_str!("../../../corpus/toy.chc");

fn toy() -> ChcSystem {
    lower_document(&parse_chc(TOY).unwrap(), DEFAULT_DNF_CAP, 0).unwrap()
}

fn formula(text: &str) -> DnfFormula {
    let vars = ["x".to_string(), "y".to_string()];
    to_dnf(&parse_formula(text, &vars).unwrap(), &vars, DEFAULT_DNF_CAP).unwrap()
}

#[test]
fn toy_invariant_is_valid_for_both_checkers() {
    let sys = toy();
    let inv = formula("(and (>= x 1) (>= y 1))");
    let cfg = VerifierConfig::default();
    assert!(brute_force_verify(&inv, &sys, &cfg).unwrap().0);
    let mut solver = Solver::new(SolverConfig::default());
    for kind in ClauseKind::ALL {
        let r = chc_verify_clause(kind, &inv, &sys, &cfg, &mut solver).unwrap();
        assert!(r.valid, "{}", kind.label());
        assert!(r.cex.is_empty());
    }
}

#[test]
fn false_invariant_fails_at_the_only_initial_state() {
    let sys = toy();
    let inv = DnfFormula::falsity(2);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut smt = SmtChecker::new(SolverConfig::default(), VerifierConfig::default());
    let mut oracle = OracleChecker {
        cfg: VerifierConfig::default(),
    };
    let checkers: [&mut dyn InvariantChecker; 2] = [&mut smt, &mut oracle];
    for checker in checkers {
        let v = checker.check(&inv, &sys, &mut rng).unwrap();
        assert!(!v.correct);
        let expected: Vec<StateVector> = vec![StateVector(vec![1, 1])];
        assert_eq!(v.cex.plus_cex.into_iter().collect::<Vec<_>>(), expected);
    }
}

#[test]
fn query_failure_reports_states_outside_post() {
    let sys = toy();
    let inv = DnfFormula::truth(2);
    let mut solver = Solver::new(SolverConfig::default());
    let r = chc_verify_clause(
        ClauseKind::Query,
        &inv,
        &sys,
        &VerifierConfig::default(),
        &mut solver,
    )
    .unwrap();
    assert!(!r.valid);
    assert!(!r.cex.is_empty());
    for c in r.cex {
        assert!(c.anchor().coords()[1] <= 0);
    }
}

#[test]
fn toy_solves_with_oracle_checker() {
    let sys = toy();
    let cfg = loopinv::SolveConfig {
        d: 1,
        c: 2,
        seed: 3,
        ..default_hyperparameters()
    };
    let mut checker = OracleChecker {
        cfg: cfg.verify.clone(),
    };
    let out = solve(&sys, &cfg, &mut checker, None).unwrap();
    assert_eq!(out.status, SolveStatus::Invariant);
    let inv = out.invariant.unwrap();
    assert!(brute_force_verify(&inv, &sys, &cfg.verify).unwrap().0);
    assert_eq!(out.trace.len() as u64, out.iterations);
}

#[test]
fn zero_iteration_budget_is_exhausted() {
    let sys = toy();
    let cfg = loopinv::SolveConfig {
        ds_t_max: 0,
        ..default_hyperparameters()
    };
    let mut checker = OracleChecker {
        cfg: cfg.verify.clone(),
    };
    let out = solve(&sys, &cfg, &mut checker, None).unwrap();
    assert_eq!(out.status, SolveStatus::Exhausted);
    assert!(out.trace.is_empty());
    assert!(out.invariant.is_none());
}

/// Cost computed straight from the formula-level definitions.
fn reference_cost(inv: &CandidateInvariant, data: &Dataset) -> (f64, usize) {
    let pos = inv.to_dnf();
    let neg = negate_dnf(&pos, DEFAULT_DNF_CAP).unwrap();
    let f = |x: f64| normalizer(x, 50.0, 2.0);
    let mut violations = 0;
    let mut plus = 0.0;
    for s in &data.plus {
        if !pos.holds(s.coords()) {
            violations += 1;
            plus += f(delta_approx(&pos, s.coords()));
        }
    }
    let mut arrow = 0.0;
    for (h, t) in &data.implications {
        if pos.holds(h.coords()) && !pos.holds(t.coords()) {
            violations += 1;
            arrow += f(delta_approx(&neg, h.coords())).min(f(delta_approx(&pos, t.coords())));
        }
    }
    let mut minus = 0.0;
    for s in &data.minus {
        if pos.holds(s.coords()) {
            violations += 1;
            minus += f(delta_approx(&neg, s.coords()));
        }
    }
    let avg = |sum: f64, len: usize| if len == 0 { 0.0 } else { sum / len as f64 };
    let value = (avg(plus, data.plus.len())
        + avg(arrow, data.implications.len())
        + avg(minus, data.minus.len()))
        / 3.0;
    (value, violations)
}

fn predicate() -> impl Strategy<Value = LinearPredicate> {
    (prop::collection::vec(-2i64..=2, 2), -6i64..=6).prop_map(|(w, b)| LinearPredicate::new(w, b))
}

fn point() -> impl Strategy<Value = StateVector> {
    prop::collection::vec(-8i64..=8, 2).prop_map(StateVector)
}

fn candidate() -> impl Strategy<Value = CandidateInvariant> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(d, c)| {
        prop::collection::vec(prop::collection::vec(predicate(), c), d)
            .prop_map(|cubes| CandidateInvariant::new(2, cubes))
    })
}

fn dataset() -> impl Strategy<Value = Dataset> {
    (
        prop::collection::btree_set(point(), 0..8),
        prop::collection::btree_set((point(), point()), 0..8),
        prop::collection::btree_set(point(), 0..8),
    )
        .prop_map(|(plus, implications, minus)| Dataset {
            plus,
            implications,
            minus,
        })
}

proptest! {
    #[test]
    fn cost_model_matches_formula_definition(inv in candidate(), data in dataset()) {
        let cost = CostModel::new(&data, 50.0, 2.0).evaluate(&inv);
        let (value, violations) = reference_cost(&inv, &data);
        prop_assert_eq!(cost.violations, violations);
        prop_assert!((cost.value - value).abs() <= 1e-12 * value.max(1.0));
        prop_assert_eq!(cost.value == 0.0, violations == 0);
    }
}
