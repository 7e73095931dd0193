use serde::{Deserialize, Serialize};

use super::CandidateInvariant;
use crate::lia::{dot, Dataset, DnfFormula, LinearPredicate};

/// `(w·s - b)^+ / ‖w‖₂`, with `0` for a satisfied constant predicate and
/// `+∞` for a violated one.
fn normalized_violation(p: &LinearPredicate, s: &[i64]) -> f64 {
    let excess = dot(&p.coeffs, s).excess_over(p.bound);
    if excess == 0.0 {
        return 0.0;
    }
    let norm = p.l2_norm();
    if norm == 0.0 {
        f64::INFINITY
    } else {
        excess / norm
    }
}

/// Cube-minimum of the average normalized hyperplane violation.
///
/// Zero exactly when `s` satisfies `formula`; `+∞` for the empty formula.
pub fn delta_approx(formula: &DnfFormula, s: &[i64]) -> f64 {
    formula
        .cubes()
        .iter()
        .map(|cube| {
            let total: f64 = cube
                .predicates
                .iter()
                .map(|p| normalized_violation(p, s))
                .sum();
            total / cube.predicates.len().max(1) as f64
        })
        .fold(f64::INFINITY, f64::min)
}

/// `F(x) = x/β` for `x <= α`, else `α/β - 1 + 2/(1 + e^{-2(x-α)/β})`.
pub fn normalizer(x: f64, alpha: f64, beta: f64) -> f64 {
    if x <= alpha {
        x / beta
    } else if x.is_infinite() {
        alpha / beta + 1.0
    } else {
        alpha / beta - 1.0 + 2.0 / (1.0 + (-2.0 * (x - alpha) / beta).exp())
    }
}

/// A cost value together with the exact number of violated datapoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cost {
    pub value: f64,
    pub violations: usize,
}

impl Cost {
    /// Zero cost, decided by exact satisfaction counts.
    pub fn is_zero(&self) -> bool {
        self.violations == 0
    }
}

/// A dataset flattened for repeated cost evaluation.
#[derive(Debug, Clone)]
pub struct CostModel {
    plus: Vec<Vec<i64>>,
    implications: Vec<(Vec<i64>, Vec<i64>)>,
    minus: Vec<Vec<i64>>,
    alpha: f64,
    beta: f64,
}

/// A predicate prepared for repeated evaluation.
struct Compiled {
    coeffs: Vec<i64>,
    bound: i64,
    norm: f64,
}

impl Compiled {
    fn new(p: &LinearPredicate) -> Self {
        Self {
            coeffs: p.coeffs.clone(),
            bound: p.bound,
            norm: p.l2_norm(),
        }
    }

    fn excess(&self, s: &[i64]) -> i128 {
        let mut acc: i128 = 0;
        for (&w, &v) in self.coeffs.iter().zip(s) {
            acc += w as i128 * v as i128;
        }
        acc - self.bound as i128
    }

    fn satisfied(&self, s: &[i64]) -> bool {
        self.excess(s) <= 0
    }

    /// Same value as `normalized_violation`.
    fn violation(&self, s: &[i64]) -> f64 {
        let excess = self.excess(s);
        if excess <= 0 {
            0.0
        } else if self.norm == 0.0 {
            f64::INFINITY
        } else {
            excess as f64 / self.norm
        }
    }
}

/// Per-point view of a candidate: per-predicate violations of `I` and of
/// the negated predicates, combined into `δ(I, s)` and `δ(¬I, s)`.
struct Evaluator {
    cubes: Vec<Vec<Compiled>>,
    /// Each cube of `¬I` as indices into `neg_preds`.
    neg_cubes: Vec<Vec<usize>>,
    neg_preds: Vec<Compiled>,
}

impl Evaluator {
    /// The cubes of `¬I` are the cubes of `negate_dnf(I)`, built directly
    /// as index sets over the distinct negated predicates.
    fn new(inv: &CandidateInvariant) -> Self {
        let mut neg_preds: Vec<LinearPredicate> = Vec::new();
        // Per cube of `I`: `None` for a negation that is constantly false,
        // `Some(None)` for constantly true, else the negated predicate index.
        let choices: Vec<Vec<Option<Option<usize>>>> = inv
            .cubes
            .iter()
            .map(|cube| {
                cube.iter()
                    .map(|p| {
                        let q = p.negate();
                        if q.is_constant() {
                            return (q.bound >= 0).then_some(None);
                        }
                        Some(Some(match neg_preds.iter().position(|r| *r == q) {
                            Some(i) => i,
                            None => {
                                neg_preds.push(q);
                                neg_preds.len() - 1
                            }
                        }))
                    })
                    .collect()
            })
            .collect();
        let mut neg_cubes: Vec<Vec<usize>> = vec![Vec::new()];
        for options in &choices {
            let mut next = Vec::with_capacity(neg_cubes.len() * options.len());
            for partial in &neg_cubes {
                for choice in options.iter().flatten() {
                    let mut extended = partial.clone();
                    if let Some(i) = choice {
                        if let Err(pos) = extended.binary_search(i) {
                            extended.insert(pos, *i);
                        }
                    }
                    next.push(extended);
                }
            }
            neg_cubes = next;
        }
        Self {
            cubes: inv
                .cubes
                .iter()
                .map(|cube| cube.iter().map(Compiled::new).collect())
                .collect(),
            neg_cubes,
            neg_preds: neg_preds.iter().map(Compiled::new).collect(),
        }
    }

    fn holds(&self, s: &[i64]) -> bool {
        self.cubes
            .iter()
            .any(|cube| cube.iter().all(|p| p.satisfied(s)))
    }

    /// `(δ(I, s), s ∈ I)`.
    fn positive(&self, s: &[i64]) -> (f64, bool) {
        let mut best = f64::INFINITY;
        for cube in &self.cubes {
            let total: f64 = cube.iter().map(|p| p.violation(s)).sum();
            best = best.min(total / cube.len() as f64);
            if best == 0.0 {
                return (0.0, true);
            }
        }
        (best, false)
    }

    /// `(δ(¬I, s), s ∈ ¬I)`, using `viol` as scratch space.
    fn negative(&self, s: &[i64], viol: &mut Vec<f64>) -> (f64, bool) {
        if !self.holds(s) {
            return (0.0, true);
        }
        viol.clear();
        viol.extend(self.neg_preds.iter().map(|p| p.violation(s)));
        let mut best = f64::INFINITY;
        for cube in &self.neg_cubes {
            let total: f64 = cube.iter().map(|&i| viol[i]).sum();
            best = best.min(total / cube.len().max(1) as f64);
            if best == 0.0 {
                return (0.0, true);
            }
        }
        (best, false)
    }
}

impl CostModel {
    pub fn new(data: &Dataset, alpha: f64, beta: f64) -> Self {
        Self {
            plus: data.plus.iter().map(|s| s.0.clone()).collect(),
            implications: data
                .implications
                .iter()
                .map(|(h, t)| (h.0.clone(), t.0.clone()))
                .collect(),
            minus: data.minus.iter().map(|s| s.0.clone()).collect(),
            alpha,
            beta,
        }
    }

    pub fn len(&self) -> usize {
        self.plus.len() + self.implications.len() + self.minus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn f(&self, x: f64) -> f64 {
        normalizer(x, self.alpha, self.beta)
    }

    pub fn evaluate(&self, inv: &CandidateInvariant) -> Cost {
        let ev = Evaluator::new(inv);
        let mut viol = Vec::new();
        let mut violations = 0;

        let mut plus_sum = 0.0;
        for p in &self.plus {
            let (d, inside) = ev.positive(p);
            if !inside {
                violations += 1;
                plus_sum += self.f(d);
            }
        }
        let mut arrow_sum = 0.0;
        for (h, t) in &self.implications {
            let (dh, h_out) = ev.negative(h, &mut viol);
            if h_out {
                continue;
            }
            let (dt, t_in) = ev.positive(t);
            if t_in {
                continue;
            }
            violations += 1;
            arrow_sum += self.f(dh).min(self.f(dt));
        }
        let mut minus_sum = 0.0;
        for n in &self.minus {
            let (d, outside) = ev.negative(n, &mut viol);
            if !outside {
                violations += 1;
                minus_sum += self.f(d);
            }
        }
        let avg = |sum: f64, len: usize| if len == 0 { 0.0 } else { sum / len as f64 };
        let value = (avg(plus_sum, self.plus.len())
            + avg(arrow_sum, self.implications.len())
            + avg(minus_sum, self.minus.len()))
            / 3.0;
        Cost { value, violations }
    }
}

/// Cost of `inv` on `data`.
pub fn cost(inv: &CandidateInvariant, data: &Dataset, alpha: f64, beta: f64) -> Cost {
    CostModel::new(data, alpha, beta).evaluate(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lia::{Cube, StateVector};

    fn p(c: &[i64], b: i64) -> LinearPredicate {
        LinearPredicate::new(c.to_vec(), b)
    }

    #[test]
    fn single_predicate_distance() {
        let f = DnfFormula::new(2, vec![Cube::new(vec![p(&[3, -4], -13)])]).unwrap();
        assert!((delta_approx(&f, &[0, 0]) - 2.6).abs() < 1e-12);
    }

    #[test]
    fn two_cube_minimum() {
        let f = DnfFormula::new(
            1,
            vec![Cube::new(vec![p(&[1], 0)]), Cube::new(vec![p(&[-1], -10)])],
        )
        .unwrap();
        assert_eq!(delta_approx(&f, &[4]), 4.0);
    }

    #[test]
    fn zero_iff_member() {
        let f = DnfFormula::new(2, vec![Cube::new(vec![p(&[1, 2], 3), p(&[-2, 1], 1)])]).unwrap();
        for x in -6..=6 {
            for y in -6..=6 {
                assert_eq!(delta_approx(&f, &[x, y]) == 0.0, f.holds(&[x, y]));
            }
        }
    }

    #[test]
    fn normalizer_values() {
        assert_eq!(normalizer(0.0, 50.0, 2.0), 0.0);
        assert_eq!(normalizer(10.0, 50.0, 2.0), 5.0);
        assert!((normalizer(1e6, 50.0, 2.0) - 26.0).abs() < 1e-6);
        assert!((normalizer(f64::INFINITY, 50.0, 2.0) - 26.0).abs() < 1e-12);
        let below = normalizer(50.0, 50.0, 2.0);
        let above = normalizer(50.0 + 1e-9, 50.0, 2.0);
        assert!((above - below).abs() < 1e-8);
    }

    fn inv(cubes: Vec<Vec<LinearPredicate>>) -> CandidateInvariant {
        CandidateInvariant::new(2, cubes)
    }

    #[test]
    fn single_plus_point() {
        let i = inv(vec![vec![p(&[1, 0], 0)]]);
        let mut data = Dataset::default();
        data.plus.insert(StateVector(vec![4, 0]));
        let c = cost(&i, &data, 50.0, 2.0);
        assert_eq!(c.violations, 1);
        assert!((c.value - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn approximate_invariant_costs_zero() {
        let i = inv(vec![vec![p(&[-1, 0], -1), p(&[0, -1], -1)]]);
        let mut data = Dataset::default();
        data.plus.insert(StateVector(vec![1, 1]));
        data.implications
            .insert((StateVector(vec![2, 3]), StateVector(vec![5, 5])));
        data.implications
            .insert((StateVector(vec![-2, 3]), StateVector(vec![-5, 5])));
        data.minus.insert(StateVector(vec![0, 0]));
        let c = cost(&i, &data, 50.0, 2.0);
        assert!(c.is_zero());
        assert_eq!(c.value, 0.0);
    }
}
