//! Linear integer arithmetic data model.
//!
//! States are integer vectors inside a symmetric bounded box, formulas are
//! disjunctions of conjunctions ("cubes") of predicates `w·x <= b`, and the
//! loop body is a piecewise linear integer relation: disjoint guard blocks,
//! each carrying one or more integer affine maps.
//!
//! All evaluation is exact. Dot products are accumulated in `i128` with
//! checked arithmetic and fall back to arbitrary precision on overflow.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default cap on the number of cubes produced by negation or DNF conversion.
pub const DEFAULT_DNF_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LiaError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(
        "state space needs dim >= 1 and int_bound >= 1 (got dim {dim}, int_bound {int_bound})"
    )]
    InvalidStateSpace { dim: usize, int_bound: i64 },
    #[error("DNF size limit exceeded: {size} cubes > cap {cap}")]
    DnfTooLarge { size: usize, cap: usize },
    #[error("frontier size limit exceeded: {size} states > cap {cap}")]
    FrontierTooLarge { size: usize, cap: usize },
    #[error("transition block {block} has no maps")]
    EmptyBlock { block: usize },
}

/// The bounded integer box `[-int_bound - 1, int_bound]^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateSpace {
    dim: usize,
    int_bound: i64,
}

impl StateSpace {
    pub fn new(dim: usize, int_bound: i64) -> Result<Self, LiaError> {
        // Coordinates must stay far enough from i64::MIN/MAX that negation and
        // ±1 adjustments never wrap.
        if dim == 0 || !(1..=(1i64 << 62)).contains(&int_bound) {
            return Err(LiaError::InvalidStateSpace { dim, int_bound });
        }
        Ok(Self { dim, int_bound })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn int_bound(&self) -> i64 {
        self.int_bound
    }

    /// Smallest admissible coordinate.
    pub fn lo(&self) -> i64 {
        -self.int_bound - 1
    }

    /// Largest admissible coordinate.
    pub fn hi(&self) -> i64 {
        self.int_bound
    }

    /// Strict upper bound on the L2 norm of any admissible state.
    pub fn radius(&self) -> f64 {
        (self.dim as f64).sqrt() * (self.int_bound as f64 + 1.0)
    }

    /// Number of lattice points per axis.
    pub fn width(&self) -> u128 {
        2 * (self.int_bound as u128 + 1)
    }

    /// Total number of admissible states, saturating at `u128::MAX`.
    pub fn cardinality(&self) -> u128 {
        let mut total: u128 = 1;
        for _ in 0..self.dim {
            total = total.saturating_mul(self.width());
        }
        total
    }

    pub fn contains(&self, coords: &[i64]) -> bool {
        coords.len() == self.dim && coords.iter().all(|&c| c >= self.lo() && c <= self.hi())
    }

    /// Iterates every state of the box in lexicographic order.
    pub fn points(&self) -> BoxPoints {
        BoxPoints::new(vec![self.lo(); self.dim], vec![self.hi(); self.dim])
    }
}

/// Lexicographic iterator over the lattice points of an axis-aligned box.
#[derive(Debug, Clone)]
pub struct BoxPoints {
    lo: Vec<i64>,
    hi: Vec<i64>,
    next: Option<Vec<i64>>,
}

impl BoxPoints {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Self {
        let empty = lo.iter().zip(&hi).any(|(l, h)| l > h);
        let next = if empty { None } else { Some(lo.clone()) };
        Self { lo, hi, next }
    }
}

impl Iterator for BoxPoints {
    type Item = StateVector;

    fn next(&mut self) -> Option<StateVector> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut axis = succ.len();
        loop {
            if axis == 0 {
                break;
            }
            axis -= 1;
            if succ[axis] < self.hi[axis] {
                succ[axis] += 1;
                self.next = Some(succ);
                break;
            }
            succ[axis] = self.lo[axis];
        }
        Some(StateVector(current))
    }
}

/// A program state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector(pub Vec<i64>);

impl StateVector {
    pub fn new(coords: Vec<i64>) -> Self {
        Self(coords)
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn inf_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn l1_distance(&self, other: &StateVector) -> i128 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| (a as i128 - b as i128).abs())
            .sum()
    }

    /// Exact squared Euclidean distance.
    pub fn sq_distance(&self, other: &StateVector) -> BigInt {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| {
                let d = BigInt::from(a) - BigInt::from(b);
                &d * &d
            })
            .sum()
    }
}

impl From<Vec<i64>> for StateVector {
    fn from(v: Vec<i64>) -> Self {
        Self(v)
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Exact `w·x`.
pub fn dot(coeffs: &[i64], x: &[i64]) -> BigIntOrSmall {
    let mut acc: i128 = 0;
    for (&w, &v) in coeffs.iter().zip(x) {
        let term = w as i128 * v as i128;
        match acc.checked_add(term) {
            Some(next) => acc = next,
            None => {
                let big: BigInt = coeffs
                    .iter()
                    .zip(x)
                    .map(|(&w, &v)| BigInt::from(w) * BigInt::from(v))
                    .sum();
                return BigIntOrSmall::Big(big);
            }
        }
    }
    BigIntOrSmall::Small(acc)
}

/// Result of an exact dot product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BigIntOrSmall {
    Small(i128),
    Big(BigInt),
}

impl BigIntOrSmall {
    /// `self - b`, as an exact big integer.
    pub fn minus(&self, b: i64) -> BigInt {
        match self {
            BigIntOrSmall::Small(v) => BigInt::from(*v) - BigInt::from(b),
            BigIntOrSmall::Big(v) => v - BigInt::from(b),
        }
    }

    pub fn le(&self, b: i64) -> bool {
        match self {
            BigIntOrSmall::Small(v) => *v <= b as i128,
            BigIntOrSmall::Big(v) => *v <= BigInt::from(b),
        }
    }

    /// `(self - b)^+` as a float.
    pub fn excess_over(&self, b: i64) -> f64 {
        match self {
            BigIntOrSmall::Small(v) => match v.checked_sub(b as i128) {
                Some(d) if d > 0 => d as f64,
                Some(_) => 0.0,
                None => self.minus(b).to_f64().unwrap_or(f64::MAX).max(0.0),
            },
            BigIntOrSmall::Big(_) => {
                let d = self.minus(b);
                if d > BigInt::zero() {
                    d.to_f64().unwrap_or(f64::MAX)
                } else {
                    0.0
                }
            }
        }
    }
}

/// `w·x <= b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinearPredicate {
    pub coeffs: Vec<i64>,
    pub bound: i64,
}

impl LinearPredicate {
    pub fn new(coeffs: Vec<i64>, bound: i64) -> Self {
        Self { coeffs, bound }
    }

    /// `0·x <= 0`, the canonical true predicate.
    pub fn truth(dim: usize) -> Self {
        Self::new(vec![0; dim], 0)
    }

    /// `0·x <= -1`, the canonical false predicate.
    pub fn falsity(dim: usize) -> Self {
        Self::new(vec![0; dim], -1)
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.iter().all(|&w| w == 0)
    }

    pub fn holds(&self, x: &[i64]) -> bool {
        dot(&self.coeffs, x).le(self.bound)
    }

    /// Integer complement: `¬(w·x <= b)` is `-w·x <= -b - 1` over the integers.
    pub fn negate(&self) -> Self {
        Self::new(self.coeffs.iter().map(|w| -w).collect(), -self.bound - 1)
    }

    /// `(w·x - b)^+`.
    pub fn violation(&self, x: &[i64]) -> f64 {
        dot(&self.coeffs, x).excess_over(self.bound)
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|&w| (w as f64) * (w as f64))
            .sum::<f64>()
            .sqrt()
    }

    pub fn inf_norm(&self) -> i64 {
        self.coeffs.iter().map(|w| w.abs()).max().unwrap_or(0)
    }
}

/// A conjunction of predicates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cube {
    pub predicates: Vec<LinearPredicate>,
}

impl Cube {
    pub fn new(predicates: Vec<LinearPredicate>) -> Self {
        Self { predicates }
    }

    pub fn holds(&self, x: &[i64]) -> bool {
        self.predicates.iter().all(|p| p.holds(x))
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    /// Drops duplicated and trivially true predicates and sorts the rest.
    /// Returns `None` when a constant predicate makes the cube unsatisfiable.
    pub fn canonical(&self) -> Option<Cube> {
        let dim = self.predicates.first().map(|p| p.dim()).unwrap_or(0);
        let mut set = BTreeSet::new();
        for p in &self.predicates {
            if p.is_constant() {
                if p.bound < 0 {
                    return None;
                }
                continue;
            }
            set.insert(p.clone());
        }
        if set.is_empty() {
            return Some(Cube::new(vec![LinearPredicate::truth(dim)]));
        }
        Some(Cube::new(set.into_iter().collect()))
    }
}

/// A disjunction of cubes. The empty disjunction is `false`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DnfFormula {
    dim: usize,
    cubes: Vec<Cube>,
}

impl DnfFormula {
    /// Builds a formula after checking every predicate has length `dim`.
    pub fn new(dim: usize, cubes: Vec<Cube>) -> Result<Self, LiaError> {
        for cube in &cubes {
            for p in &cube.predicates {
                if p.dim() != dim {
                    return Err(LiaError::DimensionMismatch {
                        expected: dim,
                        found: p.dim(),
                    });
                }
            }
        }
        Ok(Self { dim, cubes })
    }

    pub fn falsity(dim: usize) -> Self {
        Self {
            dim,
            cubes: Vec::new(),
        }
    }

    pub fn truth(dim: usize) -> Self {
        Self {
            dim,
            cubes: vec![Cube::new(vec![LinearPredicate::truth(dim)])],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cubes(&self) -> &[Cube] {
        &self.cubes
    }

    pub fn into_cubes(self) -> Vec<Cube> {
        self.cubes
    }

    pub fn is_false(&self) -> bool {
        self.cubes.is_empty()
    }

    /// `(d, c)`: number of cubes and the longest cube.
    pub fn shape(&self) -> (usize, usize) {
        (
            self.cubes.len(),
            self.cubes.iter().map(Cube::len).max().unwrap_or(0),
        )
    }

    /// Evaluation without the dimension check; callers guarantee `x.len() == dim`.
    pub fn holds(&self, x: &[i64]) -> bool {
        debug_assert_eq!(x.len(), self.dim);
        self.cubes.iter().any(|c| c.holds(x))
    }

    /// Canonical form: each cube canonicalized, unsatisfiable cubes dropped,
    /// duplicates removed, cubes sorted lexicographically.
    pub fn canonical(&self) -> DnfFormula {
        let set: BTreeSet<Cube> = self.cubes.iter().filter_map(Cube::canonical).collect();
        DnfFormula {
            dim: self.dim,
            cubes: set.into_iter().collect(),
        }
    }

    /// Conjunction of two DNFs by distribution.
    pub fn and(&self, other: &DnfFormula, cap: usize) -> Result<DnfFormula, LiaError> {
        check_dim(self.dim, other.dim)?;
        let size = self.cubes.len().saturating_mul(other.cubes.len());
        if size > cap {
            return Err(LiaError::DnfTooLarge { size, cap });
        }
        let mut cubes = Vec::with_capacity(size);
        for a in &self.cubes {
            for b in &other.cubes {
                let mut preds = a.predicates.clone();
                preds.extend(b.predicates.iter().cloned());
                cubes.push(Cube::new(preds));
            }
        }
        Ok(DnfFormula {
            dim: self.dim,
            cubes,
        }
        .canonical())
    }

    pub fn or(&self, other: &DnfFormula) -> Result<DnfFormula, LiaError> {
        check_dim(self.dim, other.dim)?;
        let mut cubes = self.cubes.clone();
        cubes.extend(other.cubes.iter().cloned());
        Ok(DnfFormula {
            dim: self.dim,
            cubes,
        }
        .canonical())
    }
}

fn check_dim(expected: usize, found: usize) -> Result<(), LiaError> {
    if expected != found {
        return Err(LiaError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Evaluates `formula` at `state`.
pub fn eval_dnf(formula: &DnfFormula, state: &StateVector) -> Result<bool, LiaError> {
    check_dim(formula.dim, state.dim())?;
    Ok(formula.holds(state.coords()))
}

/// Pointwise complement over the integers.
///
/// `¬(C_1 ∨ … ∨ C_d)` distributes into at most `c^d` cubes of at most `d`
/// predicates each. Intermediate products are deduplicated and checked
/// against `cap`.
pub fn negate_dnf(formula: &DnfFormula, cap: usize) -> Result<DnfFormula, LiaError> {
    let dim = formula.dim;
    // ¬false = true
    let mut acc: BTreeSet<Vec<LinearPredicate>> = BTreeSet::new();
    acc.insert(Vec::new());
    for cube in &formula.cubes {
        let negated: BTreeSet<LinearPredicate> = cube
            .predicates
            .iter()
            .map(LinearPredicate::negate)
            .collect();
        let mut next = BTreeSet::new();
        for partial in &acc {
            for p in &negated {
                if p.is_constant() {
                    if p.bound < 0 {
                        continue;
                    }
                    next.insert(partial.clone());
                    continue;
                }
                let mut extended = partial.clone();
                if let Err(pos) = extended.binary_search(p) {
                    extended.insert(pos, p.clone());
                }
                next.insert(extended);
            }
            if next.len() > cap {
                return Err(LiaError::DnfTooLarge {
                    size: next.len(),
                    cap,
                });
            }
        }
        acc = next;
        if acc.is_empty() {
            break;
        }
    }
    let cubes = acc
        .into_iter()
        .map(|preds| {
            if preds.is_empty() {
                Cube::new(vec![LinearPredicate::truth(dim)])
            } else {
                Cube::new(preds)
            }
        })
        .collect();
    Ok(DnfFormula { dim, cubes })
}

/// `x ↦ M·x + offset` with integer entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinearMap {
    pub matrix: Vec<Vec<i64>>,
    pub offset: Vec<i64>,
}

impl LinearMap {
    pub fn new(matrix: Vec<Vec<i64>>, offset: Vec<i64>) -> Result<Self, LiaError> {
        let n = offset.len();
        check_dim(n, matrix.len())?;
        for row in &matrix {
            check_dim(n, row.len())?;
        }
        Ok(Self { matrix, offset })
    }

    pub fn identity(dim: usize) -> Self {
        let matrix = (0..dim)
            .map(|i| (0..dim).map(|j| i64::from(i == j)).collect())
            .collect();
        Self {
            matrix,
            offset: vec![0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    /// Exact image; `None` if a coordinate does not fit in `i64`.
    pub fn apply(&self, x: &[i64]) -> Option<Vec<i64>> {
        self.matrix
            .iter()
            .zip(&self.offset)
            .map(|(row, &b)| match dot(row, x) {
                BigIntOrSmall::Small(v) => {
                    v.checked_add(b as i128).and_then(|s| i64::try_from(s).ok())
                }
                BigIntOrSmall::Big(_) => None,
            })
            .collect()
    }
}

/// One guarded piece of the transition relation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionBlock {
    pub guard: DnfFormula,
    pub maps: Vec<LinearMap>,
}

/// Tails produced by one application of the transition relation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Successors {
    pub tails: BTreeSet<StateVector>,
    /// Tails dropped because they left the state box.
    pub clipped: usize,
}

/// A piecewise linear integer relation over the loop guard.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRelation {
    dim: usize,
    blocks: Vec<TransitionBlock>,
}

impl TransitionRelation {
    pub fn new(dim: usize, blocks: Vec<TransitionBlock>) -> Result<Self, LiaError> {
        for (i, block) in blocks.iter().enumerate() {
            check_dim(dim, block.guard.dim())?;
            if block.maps.is_empty() {
                return Err(LiaError::EmptyBlock { block: i });
            }
            for map in &block.maps {
                check_dim(dim, map.dim())?;
            }
        }
        Ok(Self { dim, blocks })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[TransitionBlock] {
        &self.blocks
    }

    /// `d_T`: number of blocks.
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// `r_T`: most maps in one block.
    pub fn max_maps(&self) -> usize {
        self.blocks.iter().map(|b| b.maps.len()).max().unwrap_or(0)
    }

    /// `(d_{B_T}, c_{B_T})`: the largest guard shape over all blocks.
    pub fn guard_shape(&self) -> (usize, usize) {
        self.blocks.iter().fold((0, 0), |(d, c), b| {
            let (bd, bc) = b.guard.shape();
            (d.max(bd), c.max(bc))
        })
    }

    /// Indices of blocks whose guard holds at `head`.
    pub fn firing_blocks(&self, head: &[i64]) -> impl Iterator<Item = usize> + '_ {
        let head = head.to_vec();
        self.blocks
            .iter()
            .enumerate()
            .filter(move |(_, b)| b.guard.holds(&head))
            .map(|(i, _)| i)
    }
}

/// All tails of one application of `trans` at `head`; tails outside `space`
/// are dropped and counted.
pub fn apply_transition(
    trans: &TransitionRelation,
    space: &StateSpace,
    head: &StateVector,
) -> Successors {
    let mut out = Successors::default();
    if head.dim() != trans.dim {
        return out;
    }
    for block in &trans.blocks {
        if !block.guard.holds(head.coords()) {
            continue;
        }
        for map in &block.maps {
            match map.apply(head.coords()) {
                Some(tail) if space.contains(&tail) => {
                    out.tails.insert(StateVector(tail));
                }
                _ => out.clipped += 1,
            }
        }
    }
    if out.clipped > 0 {
        log::trace!("{} tails of {head} left the state box", out.clipped);
    }
    out
}

/// `depth` successive expansions of `states`, expanding only heads that
/// satisfy `guard`.
pub fn iterated_tails(
    trans: &TransitionRelation,
    space: &StateSpace,
    guard: &DnfFormula,
    states: &BTreeSet<StateVector>,
    depth: usize,
    cap: usize,
) -> Result<BTreeSet<StateVector>, LiaError> {
    let mut frontier = states.clone();
    for _ in 0..depth {
        let mut next = BTreeSet::new();
        for head in &frontier {
            if head.dim() != guard.dim() || !guard.holds(head.coords()) {
                continue;
            }
            next.extend(apply_transition(trans, space, head).tails);
            if next.len() > cap {
                return Err(LiaError::FrontierTooLarge {
                    size: next.len(),
                    cap,
                });
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    Ok(frontier)
}

/// `(P, B, T, Q)` over a bounded state space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChcSystem {
    pub space: StateSpace,
    pub pre: DnfFormula,
    pub guard: DnfFormula,
    pub trans: TransitionRelation,
    pub post: DnfFormula,
}

impl ChcSystem {
    pub fn new(
        space: StateSpace,
        pre: DnfFormula,
        guard: DnfFormula,
        trans: TransitionRelation,
        post: DnfFormula,
    ) -> Result<Self, LiaError> {
        let n = space.dim();
        check_dim(n, pre.dim())?;
        check_dim(n, guard.dim())?;
        check_dim(n, trans.dim())?;
        check_dim(n, post.dim())?;
        Ok(Self {
            space,
            pre,
            guard,
            trans,
            post,
        })
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }
}

/// Sampled positive states, negative states and implication pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub plus: BTreeSet<StateVector>,
    pub minus: BTreeSet<StateVector>,
    pub implications: BTreeSet<(StateVector, StateVector)>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.plus.len() + self.minus.len() + self.implications.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_superset_of(&self, other: &Dataset) -> bool {
        self.plus.is_superset(&other.plus)
            && self.minus.is_superset(&other.minus)
            && self.implications.is_superset(&other.implications)
    }

    /// Per-class union.
    pub fn extend(&mut self, other: &Dataset) {
        self.plus.extend(other.plus.iter().cloned());
        self.minus.extend(other.minus.iter().cloned());
        self.implications.extend(other.implications.iter().cloned());
    }
}

/// Dataset summaries that drive the annealing guarantees.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    /// Averaged L∞ magnitude of the dataset.
    pub kappa_inf: BigRational,
    /// Mean Euclidean head-to-tail distance of the implication pairs.
    pub lambda_arrow: f64,
}

impl DatasetStats {
    pub fn kappa_inf_f64(&self) -> f64 {
        self.kappa_inf.to_f64().unwrap_or(f64::NAN)
    }
}

fn class_mean<I: Iterator<Item = i64>>(values: I) -> BigRational {
    let mut sum = BigInt::zero();
    let mut count: u64 = 0;
    for v in values {
        sum += BigInt::from(v);
        count += 1;
    }
    if count == 0 {
        // Empty classes contribute 0.
        return BigRational::zero();
    }
    BigRational::new(sum, BigInt::from(count))
}

pub fn dataset_stats(data: &Dataset) -> DatasetStats {
    let plus = class_mean(data.plus.iter().map(StateVector::inf_norm));
    let arrows = class_mean(
        data.implications
            .iter()
            .map(|(h, t)| h.inf_norm().max(t.inf_norm())),
    );
    let minus = class_mean(data.minus.iter().map(StateVector::inf_norm));
    let kappa_inf = (plus + arrows + minus) / BigRational::from_integer(BigInt::from(3));

    let lambda_arrow = if data.implications.is_empty() {
        0.0
    } else {
        let total: f64 = data
            .implications
            .iter()
            .map(|(h, t)| h.sq_distance(t).to_f64().unwrap_or(f64::MAX).sqrt())
            .sum();
        total / data.implications.len() as f64
    };
    DatasetStats {
        kappa_inf,
        lambda_arrow,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(coeffs: &[i64], b: i64) -> LinearPredicate {
        LinearPredicate::new(coeffs.to_vec(), b)
    }

    fn dnf(dim: usize, cubes: Vec<Vec<LinearPredicate>>) -> DnfFormula {
        DnfFormula::new(dim, cubes.into_iter().map(Cube::new).collect()).unwrap()
    }

    fn sv(c: &[i64]) -> StateVector {
        StateVector(c.to_vec())
    }

    #[test]
    fn boundary_inclusion() {
        let f = dnf(1, vec![vec![p(&[1], 5)]]);
        assert!(eval_dnf(&f, &sv(&[5])).unwrap());
        assert!(!eval_dnf(&f, &sv(&[6])).unwrap());
    }

    #[test]
    fn neither_cube_holds() {
        let f = dnf(
            2,
            vec![vec![p(&[1, 0], 5), p(&[0, 1], 3)], vec![p(&[-1, 0], -10)]],
        );
        assert!(!eval_dnf(&f, &sv(&[6, 0])).unwrap());
    }

    #[test]
    fn empty_disjunction_is_false() {
        let f = DnfFormula::falsity(3);
        assert!(!eval_dnf(&f, &sv(&[0, 0, 0])).unwrap());
    }

    #[test]
    fn eval_dimension_mismatch() {
        let f = dnf(1, vec![vec![p(&[1], 5)]]);
        assert_eq!(
            eval_dnf(&f, &sv(&[1, 2])),
            Err(LiaError::DimensionMismatch {
                expected: 1,
                found: 2
            })
        );
    }

    #[test]
    fn negate_single_predicate() {
        let f = dnf(1, vec![vec![p(&[1], 5)]]);
        let g = negate_dnf(&f, DEFAULT_DNF_CAP).unwrap();
        assert_eq!(g, dnf(1, vec![vec![p(&[-1], -6)]]));
    }

    #[test]
    fn negate_de_morgan_cube() {
        let f = dnf(2, vec![vec![p(&[1, 0], 5), p(&[0, 1], 3)]]);
        let g = negate_dnf(&f, DEFAULT_DNF_CAP).unwrap();
        assert_eq!(g.shape(), (2, 1));
        let cubes: BTreeSet<_> = g.cubes().iter().cloned().collect();
        let expected: BTreeSet<_> = [
            Cube::new(vec![p(&[-1, 0], -6)]),
            Cube::new(vec![p(&[0, -1], -4)]),
        ]
        .into_iter()
        .collect();
        assert_eq!(cubes, expected);
    }

    #[test]
    fn negate_de_morgan_disjunction() {
        let f = dnf(2, vec![vec![p(&[1, 0], 1)], vec![p(&[0, 1], 1)]]);
        let g = negate_dnf(&f, DEFAULT_DNF_CAP).unwrap();
        assert_eq!(g.cubes().len(), 1);
        let preds: BTreeSet<_> = g.cubes()[0].predicates.iter().cloned().collect();
        assert_eq!(
            preds,
            [p(&[-1, 0], -2), p(&[0, -1], -2)].into_iter().collect()
        );
    }

    #[test]
    fn negate_false_and_true() {
        let t = negate_dnf(&DnfFormula::falsity(2), DEFAULT_DNF_CAP).unwrap();
        assert!(t.holds(&[7, -3]));
        let f = negate_dnf(&DnfFormula::truth(2), DEFAULT_DNF_CAP).unwrap();
        assert!(f.is_false());
    }

    #[test]
    fn negate_respects_cap() {
        let cube = |s: i64| vec![p(&[1, 0], s), p(&[0, 1], s), p(&[1, 1], s)];
        let f = dnf(2, vec![cube(1), cube(2), cube(3)]);
        assert!(matches!(
            negate_dnf(&f, 5),
            Err(LiaError::DnfTooLarge { .. })
        ));
        assert_eq!(negate_dnf(&f, 27).unwrap().cubes().len(), 27);
    }

    #[test]
    fn negate_dedups_shared_predicates() {
        let f = dnf(1, vec![vec![p(&[1], 2)], vec![p(&[1], 2)]]);
        let g = negate_dnf(&f, DEFAULT_DNF_CAP).unwrap();
        assert_eq!(g, dnf(1, vec![vec![p(&[-1], -3)]]));
    }

    fn toy_trans() -> TransitionRelation {
        let map = LinearMap::new(vec![vec![1, 1], vec![1, 1]], vec![0, 0]).unwrap();
        TransitionRelation::new(
            2,
            vec![TransitionBlock {
                guard: DnfFormula::truth(2),
                maps: vec![map],
            }],
        )
        .unwrap()
    }

    fn lb3_trans() -> TransitionRelation {
        let a = LinearMap::new(vec![vec![2, 1], vec![0, 1]], vec![0, 4]).unwrap();
        let b = LinearMap::new(vec![vec![1, 0], vec![0, 1]], vec![1, -1]).unwrap();
        TransitionRelation::new(
            2,
            vec![TransitionBlock {
                guard: dnf(2, vec![vec![p(&[1, 1], 14)]]),
                maps: vec![a, b],
            }],
        )
        .unwrap()
    }

    #[test]
    fn toy_transition() {
        let space = StateSpace::new(2, 64).unwrap();
        let out = apply_transition(&toy_trans(), &space, &sv(&[1, 1]));
        assert_eq!(out.tails, [sv(&[2, 2])].into_iter().collect());
        assert_eq!(out.clipped, 0);
    }

    #[test]
    fn nondeterministic_transition() {
        let space = StateSpace::new(2, 64).unwrap();
        let out = apply_transition(&lb3_trans(), &space, &sv(&[1, 1]));
        assert_eq!(out.tails, [sv(&[3, 5]), sv(&[2, 0])].into_iter().collect());
    }

    #[test]
    fn no_guard_fires() {
        let space = StateSpace::new(2, 64).unwrap();
        let out = apply_transition(&lb3_trans(), &space, &sv(&[10, 10]));
        assert!(out.tails.is_empty());
    }

    #[test]
    fn tails_outside_box_are_clipped() {
        let space = StateSpace::new(2, 4).unwrap();
        let out = apply_transition(&toy_trans(), &space, &sv(&[3, 3]));
        assert!(out.tails.is_empty());
        assert_eq!(out.clipped, 1);
    }

    #[test]
    fn iterated_deterministic_chain() {
        let space = StateSpace::new(2, 64).unwrap();
        let start = [sv(&[1, 1])].into_iter().collect();
        let out =
            iterated_tails(&toy_trans(), &space, &DnfFormula::truth(2), &start, 2, 1000).unwrap();
        assert_eq!(out, [sv(&[4, 4])].into_iter().collect());
    }

    #[test]
    fn iterated_empty_input() {
        let space = StateSpace::new(2, 64).unwrap();
        let out = iterated_tails(
            &lb3_trans(),
            &space,
            &DnfFormula::truth(2),
            &BTreeSet::new(),
            5,
            1000,
        )
        .unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn iterated_matches_bfs() {
        // Independent breadth-first expansion written against the raw maps.
        let space = StateSpace::new(2, 64).unwrap();
        let guard = dnf(2, vec![vec![p(&[1, 1], 14)]]);
        let step = |s: (i64, i64)| -> Vec<(i64, i64)> {
            if s.0 + s.1 > 14 {
                return vec![];
            }
            vec![(2 * s.0 + s.1, s.1 + 4), (s.0 + 1, s.1 - 1)]
        };
        let mut level = vec![(1i64, 1i64)];
        for _ in 0..2 {
            let mut next: Vec<_> = level.iter().flat_map(|&s| step(s)).collect();
            next.sort();
            next.dedup();
            level = next;
        }
        let expected: BTreeSet<_> = level.iter().map(|&(a, b)| sv(&[a, b])).collect();
        assert_eq!(
            expected,
            [sv(&[11, 9]), sv(&[4, 4]), sv(&[3, -1])]
                .into_iter()
                .collect()
        );
        let start = [sv(&[1, 1])].into_iter().collect();
        let out = iterated_tails(&lb3_trans(), &space, &guard, &start, 2, 1000).unwrap();
        assert_eq!(out, expected);
    }

    #[test]
    fn iterated_frontier_cap() {
        let space = StateSpace::new(2, 64).unwrap();
        let start = [sv(&[1, 1])].into_iter().collect();
        let guard = dnf(2, vec![vec![p(&[1, 1], 14)]]);
        assert!(matches!(
            iterated_tails(&lb3_trans(), &space, &guard, &start, 2, 2),
            Err(LiaError::FrontierTooLarge { .. })
        ));
    }

    #[test]
    fn stats_direct_averages() {
        let mut data = Dataset::default();
        data.plus.insert(sv(&[1, 1]));
        data.minus.insert(sv(&[0, 0]));
        data.implications.insert((sv(&[1, 1]), sv(&[2, 2])));
        let stats = dataset_stats(&data);
        assert_eq!(stats.kappa_inf, BigRational::from_integer(BigInt::from(1)));
        assert!((stats.lambda_arrow - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn stats_empty_classes() {
        let stats = dataset_stats(&Dataset::default());
        assert!(stats.kappa_inf.is_zero());
        assert_eq!(stats.lambda_arrow, 0.0);
    }

    #[test]
    fn box_points_enumerates_lexicographically() {
        let pts: Vec<_> = BoxPoints::new(vec![0, -1], vec![1, 0]).collect();
        assert_eq!(
            pts,
            vec![sv(&[0, -1]), sv(&[0, 0]), sv(&[1, -1]), sv(&[1, 0])]
        );
        let space = StateSpace::new(2, 3).unwrap();
        assert_eq!(space.points().count() as u128, space.cardinality());
    }

    #[test]
    fn overflow_falls_back_to_bigint() {
        let big = i64::MAX;
        let pred = p(&[big, big, big], big);
        assert!(!pred.holds(&[big, big, big]));
        assert!(pred.holds(&[-big, -big, -big]));
    }
}
