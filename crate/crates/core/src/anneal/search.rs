use std::io::Write;
use std::sync::Mutex;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    AnnealConfig, Board, CandidateInvariant, Cost, CostModel, SearchSpaceParams, StopSignal,
};
use crate::lia::{LinearPredicate, StateSpace};

/// One neighborhood move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    /// `w[coord] += delta` on predicate `(cube, pred)`.
    Coeff {
        cube: usize,
        pred: usize,
        coord: usize,
        delta: i64,
    },
    /// `b += delta` on predicate `(cube, pred)`.
    Const {
        cube: usize,
        pred: usize,
        delta: i64,
    },
}

impl Move {
    pub fn apply(&self, inv: &CandidateInvariant) -> CandidateInvariant {
        let mut out = inv.clone();
        match *self {
            Move::Coeff {
                cube,
                pred,
                coord,
                delta,
            } => out.cubes[cube][pred].coeffs[coord] += delta,
            Move::Const { cube, pred, delta } => out.cubes[cube][pred].bound += delta,
        }
        out
    }
}

/// Every legal move from `inv`: ±1 on one coefficient (keeping the vector
/// nonzero with ∞-norm at most `k`) or ±1 on a constant (keeping
/// `|b| <= k'`).
pub fn legal_moves(inv: &CandidateInvariant, params: &SearchSpaceParams) -> Vec<Move> {
    let mut moves = Vec::with_capacity(params.max_moves());
    for (ci, cube) in inv.cubes.iter().enumerate() {
        for (pi, p) in cube.iter().enumerate() {
            for coord in 0..p.coeffs.len() {
                for delta in [-1, 1] {
                    let v = p.coeffs[coord] + delta;
                    if v.abs() > params.k {
                        continue;
                    }
                    let zero = v == 0
                        && p.coeffs
                            .iter()
                            .enumerate()
                            .all(|(j, &w)| j == coord || w == 0);
                    if zero {
                        continue;
                    }
                    moves.push(Move::Coeff {
                        cube: ci,
                        pred: pi,
                        coord,
                        delta,
                    });
                }
            }
            for delta in [-1, 1] {
                if (p.bound + delta).abs() <= params.k_prime {
                    moves.push(Move::Const {
                        cube: ci,
                        pred: pi,
                        delta,
                    });
                }
            }
        }
    }
    moves
}

/// A uniformly chosen neighbor.
pub fn sample_neighbor<R: Rng + ?Sized>(
    inv: &CandidateInvariant,
    params: &SearchSpaceParams,
    rng: &mut R,
) -> CandidateInvariant {
    let moves = legal_moves(inv, params);
    assert!(
        !moves.is_empty(),
        "X(k) always has a legal move for n, k >= 1"
    );
    moves[rng.gen_range(0..moves.len())].apply(inv)
}

fn random_coeffs<R: Rng + ?Sized>(n: usize, k: i64, rng: &mut R) -> Vec<i64> {
    loop {
        let w: Vec<i64> = (0..n).map(|_| rng.gen_range(-k..=k)).collect();
        if w.iter().any(|&v| v != 0) {
            return w;
        }
    }
}

/// Best of `l0` random candidates with all constants 0. Ties go to the
/// first trial.
pub fn initial_invariant<R: Rng + ?Sized>(
    model: &CostModel,
    params: &SearchSpaceParams,
    l0: u64,
    rng: &mut R,
) -> (CandidateInvariant, Cost) {
    assert!(l0 >= 1, "l0 must be positive");
    let mut best: Option<(CandidateInvariant, Cost)> = None;
    for _ in 0..l0 {
        let cubes = (0..params.d)
            .map(|_| {
                (0..params.c)
                    .map(|_| LinearPredicate::new(random_coeffs(params.n, params.k, rng), 0))
                    .collect()
            })
            .collect();
        let inv = CandidateInvariant::new(params.n, cubes);
        let c = model.evaluate(&inv);
        if best.as_ref().is_none_or(|(_, b)| c.value < b.value) {
            best = Some((inv, c));
        }
    }
    best.expect("l0 >= 1")
}

/// Cost before and after one random-walk move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionSample {
    pub cost_before: f64,
    pub cost_after: f64,
}

/// `t_rw` unconditional moves from `start`.
pub fn bounded_random_walk<R: Rng + ?Sized>(
    start: &CandidateInvariant,
    t_rw: u64,
    model: &CostModel,
    params: &SearchSpaceParams,
    rng: &mut R,
) -> Vec<TransitionSample> {
    let mut current = start.clone();
    let mut c = model.evaluate(&current).value;
    let mut out = Vec::with_capacity(t_rw as usize);
    for _ in 0..t_rw {
        current = sample_neighbor(&current, params, rng);
        let next = model.evaluate(&current).value;
        out.push(TransitionSample {
            cost_before: c,
            cost_after: next,
        });
        c = next;
    }
    out
}

/// Initial temperature for a target mean acceptance `a0` of uphill moves.
///
/// Starts from `T = -Σ(c'-c) / (ln(a0)·|δ+|)` and iterates
/// `T ← T·sqrt(ln(a)/ln(a0))` with `a` the mean of `e^{-(c'-c)/T}` until
/// `|a - a0| <= eps_t`, for at most 1000 rounds. Falls back to 1.0 when the
/// walk has no uphill move.
pub fn initial_temperature(walk: &[TransitionSample], a0: f64, eps_t: f64) -> f64 {
    let gaps: Vec<f64> = walk
        .iter()
        .filter(|s| s.cost_after > s.cost_before)
        .map(|s| s.cost_after - s.cost_before)
        .collect();
    if gaps.is_empty() {
        log::warn!("random walk found no uphill move; using T0 = 1.0");
        return 1.0;
    }
    let ln_a0 = a0.ln();
    let mut t = -gaps.iter().sum::<f64>() / (ln_a0 * gaps.len() as f64);
    for _ in 0..1000 {
        let a = gaps.iter().map(|g| (-g / t).exp()).sum::<f64>() / gaps.len() as f64;
        if (a - a0).abs() <= eps_t {
            return t;
        }
        let a = a.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
        t *= (a.ln() / ln_a0).sqrt();
    }
    log::warn!("initial temperature did not converge; using T0 = {t}");
    t
}

/// JSON-lines sink for per-1000-step annealing records.
pub struct Telemetry {
    out: Mutex<Box<dyn Write + Send>>,
}

impl Telemetry {
    pub fn new(out: Box<dyn Write + Send>) -> Self {
        Self {
            out: Mutex::new(out),
        }
    }

    pub fn record(&self, value: &serde_json::Value) {
        let mut out = self.out.lock().expect("telemetry lock");
        if let Err(e) = writeln!(out, "{value}") {
            log::warn!("telemetry write failed: {e}");
        }
    }
}

const TELEMETRY_PERIOD: u64 = 1_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SaOutcome {
    pub invariant: Option<CandidateInvariant>,
    /// Last step executed.
    pub steps: u64,
    pub t0: f64,
}

/// Accepts a move from cost `before` to `after` with probability
/// `e^{-(after-before)^+/temp}`. Downhill and level moves always pass.
pub fn metropolis_accept<R: Rng + ?Sized>(before: f64, after: f64, temp: f64, rng: &mut R) -> bool {
    let uphill = (after - before).max(0.0);
    uphill == 0.0 || rng.gen::<f64>() < (-uphill / temp).exp()
}

/// Logarithmic-cooling annealing from `start`.
///
/// Step `t` (from 1) uses `T = T0/ln(1+t)` and accepts a neighbor with
/// probability `e^{-(c'-c)^+/T}`. Returns the first zero-cost candidate;
/// `start` itself is returned at step 0 when it already has zero cost.
/// Every `t_check` steps the stop signal is consulted.
#[allow(clippy::too_many_arguments)]
pub fn simulated_annealing<R: Rng + ?Sized>(
    model: &CostModel,
    start: &CandidateInvariant,
    params: &SearchSpaceParams,
    cfg: &AnnealConfig,
    t0: f64,
    worker: usize,
    stop: &dyn StopSignal,
    rng: &mut R,
    telemetry: Option<&Telemetry>,
) -> SaOutcome {
    let mut current = start.clone();
    let mut c = model.evaluate(&current);
    if c.is_zero() {
        stop.post_success(worker, 0);
        return SaOutcome {
            invariant: Some(current),
            steps: 0,
            t0,
        };
    }
    let mut accepted_window = 0u64;
    for t in 1..=cfg.t_max {
        if t % cfg.t_check == 0 && stop.checkpoint(worker, t) {
            stop.finish(worker);
            return SaOutcome {
                invariant: None,
                steps: t - 1,
                t0,
            };
        }
        let temp = t0 / ((1 + t) as f64).ln();
        let candidate = sample_neighbor(&current, params, rng);
        let next = model.evaluate(&candidate);
        if next.is_zero() {
            stop.post_success(worker, t);
            return SaOutcome {
                invariant: Some(candidate),
                steps: t,
                t0,
            };
        }
        if metropolis_accept(c.value, next.value, temp, rng) {
            current = candidate;
            c = next;
            accepted_window += 1;
        }
        if t % TELEMETRY_PERIOD == 0 {
            if let Some(tel) = telemetry {
                tel.record(&serde_json::json!({
                    "worker": worker,
                    "t": t,
                    "temperature": temp,
                    "cost": c.value,
                    "violations": c.violations,
                    "accept_rate": accepted_window as f64 / TELEMETRY_PERIOD as f64,
                }));
            }
            accepted_window = 0;
        }
    }
    stop.finish(worker);
    SaOutcome {
        invariant: None,
        steps: cfg.t_max,
        t0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParallelOutcome {
    pub invariant: Option<CandidateInvariant>,
    /// Index of the worker whose result was taken.
    pub worker: Option<usize>,
    /// Steps executed by each worker.
    pub steps: Vec<u64>,
    pub t0: Vec<f64>,
}

impl ParallelOutcome {
    pub fn success(&self) -> bool {
        self.invariant.is_some()
    }

    pub fn total_steps(&self) -> u64 {
        self.steps.iter().sum()
    }
}

/// One annealing worker per `k` in `cfg.k_list`, each with its own RNG.
/// The successful worker with the lowest index wins.
pub fn parallel_sa<R: Rng + Send>(
    model: &CostModel,
    start: &CandidateInvariant,
    space: &StateSpace,
    template: &SearchSpaceParams,
    cfg: &AnnealConfig,
    rngs: Vec<R>,
    telemetry: Option<&Telemetry>,
) -> ParallelOutcome {
    assert_eq!(rngs.len(), cfg.k_list.len(), "one RNG per worker");
    let board = Board::new(cfg.k_list.len());
    let results: Vec<SaOutcome> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .k_list
            .iter()
            .zip(rngs)
            .enumerate()
            .map(|(w, (&k, mut rng))| {
                let board = &board;
                scope.spawn(move || {
                    let params = template.with_k(k, space);
                    let start = start.clamped(&params);
                    let walk = bounded_random_walk(&start, cfg.t_rw, model, &params, &mut rng);
                    let t0 = initial_temperature(&walk, cfg.a0, cfg.eps_t);
                    log::debug!("worker {w} (k = {k}): T0 = {t0}");
                    simulated_annealing(
                        model, &start, &params, cfg, t0, w, board, &mut rng, telemetry,
                    )
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("annealing worker panicked"))
            .collect()
    });
    let winner = results.iter().position(|r| r.invariant.is_some());
    ParallelOutcome {
        invariant: winner.and_then(|w| results[w].invariant.clone()),
        worker: winner,
        steps: results.iter().map(|r| r.steps).collect(),
        t0: results.iter().map(|r| r.t0).collect(),
    }
}
