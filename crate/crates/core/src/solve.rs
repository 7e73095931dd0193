//! The outer sample-search-check loop.

use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anneal::{
    initial_invariant, parallel_sa, AnnealConfig, AnnealError, CandidateInvariant, CostModel,
    SearchSpaceParams, Telemetry,
};
use crate::lia::{
    dataset_stats, negate_dnf, ChcSystem, Dataset, DnfFormula, LiaError, DEFAULT_DNF_CAP,
};
use crate::sampling::{
    bounding_box, initial_dataset, refine_criterion, refined_dataset, SamplingError,
};
use crate::verify::{CexDataset, InvariantChecker, VerifierConfig, VerifyError};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Anneal(#[from] AnnealError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Lia(#[from] LiaError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub d: usize,
    pub c: usize,
    pub eps0: BigRational,
    pub delta0: BigRational,
    pub t_refine: u64,
    pub ds_t_max: u64,
    pub anneal: AnnealConfig,
    pub verify: VerifierConfig,
    pub seed: u64,
    pub dnf_cap: usize,
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Documented defaults for every hyperparameter.
pub fn default_hyperparameters() -> SolveConfig {
    SolveConfig {
        d: 1,
        c: 2,
        eps0: ratio(1, 2),
        delta0: ratio(9, 10),
        t_refine: 3,
        ds_t_max: 50,
        anneal: AnnealConfig::default(),
        verify: VerifierConfig::default(),
        seed: 0,
        dnf_cap: DEFAULT_DNF_CAP,
    }
}

impl Default for SolveConfig {
    fn default() -> Self {
        default_hyperparameters()
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let zero = ratio(0, 1);
        let one = ratio(1, 1);
        if self.eps0 <= zero || self.eps0 >= one {
            return Err(SolveError::Config(format!(
                "eps0 = {} is not in (0, 1)",
                self.eps0
            )));
        }
        if self.delta0 <= zero || self.delta0 >= one {
            return Err(SolveError::Config(format!(
                "delta0 = {} is not in (0, 1)",
                self.delta0
            )));
        }
        if self.t_refine == 0 {
            return Err(SolveError::Config("t_refine must be positive".into()));
        }
        if self.anneal.t_check == 0 || self.anneal.l0 == 0 {
            return Err(SolveError::Config("t_check and l0 must be positive".into()));
        }
        if self.anneal.k_list.iter().any(|&k| k < 1) {
            return Err(SolveError::Config("every k in k_list must be >= 1".into()));
        }
        self.anneal.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Invariant,
    SaFail,
    Exhausted,
    SolverError,
}

impl SolveStatus {
    pub fn label(self) -> &'static str {
        match self {
            SolveStatus::Invariant => "invariant",
            SolveStatus::SaFail => "sa_fail",
            SolveStatus::Exhausted => "exhausted",
            SolveStatus::SolverError => "solver_error",
        }
    }
}

/// One loop iteration. Sizes are taken before the check; counterexample
/// counts are what the check returned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u64,
    pub epsilon: String,
    pub epsilon_f64: f64,
    pub plus: usize,
    pub implications: usize,
    pub minus: usize,
    pub plus_cex: usize,
    pub ice_cex: usize,
    pub minus_cex: usize,
    pub kappa_inf: f64,
    pub lambda_arrow: f64,
    pub sa_steps: u64,
    pub sa_worker: Option<usize>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub invariant: Option<DnfFormula>,
    pub iterations: u64,
    pub trace: Vec<IterationRecord>,
    pub error: Option<VerifyError>,
}

/// Per-class set union.
pub fn merge_cex(data: &Dataset, cex: &CexDataset) -> Dataset {
    let mut out = data.clone();
    out.plus.extend(cex.plus_cex.iter().cloned());
    out.implications.extend(cex.ice_cex.iter().cloned());
    out.minus.extend(cex.minus_cex.iter().cloned());
    out
}

fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Runs the loop without observing intermediate datasets.
pub fn solve(
    sys: &ChcSystem,
    cfg: &SolveConfig,
    checker: &mut dyn InvariantChecker,
    telemetry: Option<&Telemetry>,
) -> Result<SolveOutcome, SolveError> {
    solve_observed(sys, cfg, checker, telemetry, &mut |_, _| {})
}

/// Runs the loop, calling `observe` with each iteration's record and the
/// dataset the search used.
pub fn solve_observed(
    sys: &ChcSystem,
    cfg: &SolveConfig,
    checker: &mut dyn InvariantChecker,
    telemetry: Option<&Telemetry>,
    observe: &mut dyn FnMut(&IterationRecord, &Dataset),
) -> Result<SolveOutcome, SolveError> {
    cfg.validate()?;
    let template = SearchSpaceParams::new(&sys.space, cfg.d, cfg.c, 1)?;
    template.check_negation(cfg.dnf_cap)?;
    let mut outcome = SolveOutcome {
        status: SolveStatus::Exhausted,
        invariant: None,
        iterations: 0,
        trace: Vec::new(),
        error: None,
    };
    if cfg.ds_t_max == 0 {
        return Ok(outcome);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut eps = cfg.eps0.clone();
    let mut data = initial_dataset(sys, &eps, &cfg.delta0, cfg.dnf_cap, &mut rng)?;
    let k_min = *cfg.anneal.k_list.iter().min().expect("k_list is non-empty");
    let mut start: CandidateInvariant = {
        let model = CostModel::new(&data, cfg.anneal.alpha, cfg.anneal.beta);
        let params = template.with_k(k_min, &sys.space);
        initial_invariant(&model, &params, cfg.anneal.l0, &mut rng).0
    };

    for t in 0..cfg.ds_t_max {
        let clock = Instant::now();
        let stats = dataset_stats(&data);
        let mut record = IterationRecord {
            iteration: t,
            epsilon: eps.to_string(),
            epsilon_f64: to_f64(&eps),
            plus: data.plus.len(),
            implications: data.implications.len(),
            minus: data.minus.len(),
            plus_cex: 0,
            ice_cex: 0,
            minus_cex: 0,
            kappa_inf: stats.kappa_inf_f64(),
            lambda_arrow: stats.lambda_arrow,
            sa_steps: 0,
            sa_worker: None,
            wall_ms: 0,
        };
        outcome.iterations = t + 1;

        let model = CostModel::new(&data, cfg.anneal.alpha, cfg.anneal.beta);
        let rngs: Vec<ChaCha8Rng> = (0..cfg.anneal.workers)
            .map(|_| ChaCha8Rng::seed_from_u64(rng.gen()))
            .collect();
        let sa = parallel_sa(
            &model,
            &start,
            &sys.space,
            &template,
            &cfg.anneal,
            rngs,
            telemetry,
        );
        record.sa_steps = sa.total_steps();
        record.sa_worker = sa.worker;
        let Some(found) = sa.invariant else {
            log::info!("iteration {t}: annealing failed (seed {})", cfg.seed);
            finish(&mut outcome, record, &data, telemetry, clock, observe);
            outcome.status = SolveStatus::SaFail;
            return Ok(outcome);
        };

        let dnf = found.to_dnf();
        let verdict = match checker.check(&dnf, sys, &mut rng) {
            Ok(v) => v,
            Err(e) => {
                log::error!("iteration {t}: {} check failed: {e}", checker.name());
                finish(&mut outcome, record, &data, telemetry, clock, observe);
                outcome.status = SolveStatus::SolverError;
                outcome.error = Some(e);
                return Ok(outcome);
            }
        };
        record.plus_cex = verdict.cex.plus_cex.len();
        record.ice_cex = verdict.cex.ice_cex.len();
        record.minus_cex = verdict.cex.minus_cex.len();
        finish(&mut outcome, record, &data, telemetry, clock, observe);
        if verdict.correct {
            outcome.status = SolveStatus::Invariant;
            outcome.invariant = Some(dnf);
            return Ok(outcome);
        }

        data = merge_cex(&data, &verdict.cex);
        if refine_criterion(t + 1, cfg.t_refine) {
            let (refined, new_eps) =
                refined_dataset(sys, &eps, &cfg.delta0, &data, cfg.dnf_cap, &mut rng)?;
            data = refined;
            eps = new_eps;
        }
        start = found;
    }
    Ok(outcome)
}

fn finish(
    outcome: &mut SolveOutcome,
    mut record: IterationRecord,
    data: &Dataset,
    telemetry: Option<&Telemetry>,
    clock: Instant,
    observe: &mut dyn FnMut(&IterationRecord, &Dataset),
) {
    record.wall_ms = clock.elapsed().as_millis() as u64;
    if let Some(tel) = telemetry {
        let mut value = serde_json::to_value(&record).expect("record serializes");
        value["kind"] = "iteration".into();
        tel.record(&value);
    }
    observe(&record, data);
    outcome.trace.push(record);
}

/// Sum of bounding-box cardinalities of the cubes, an overestimate of the
/// number of lattice points of `formula` in the state box.
pub fn lattice_overestimate(formula: &DnfFormula, sys: &ChcSystem) -> u128 {
    formula
        .cubes()
        .iter()
        .filter_map(|cube| bounding_box(cube, &sys.space))
        .map(|b| b.cardinality())
        .fold(0u128, u128::saturating_add)
}

/// Non-binding run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub rows: Vec<IterationRecord>,
    /// Overestimates for `P`, `B`, `¬Q`.
    pub lambda_hat: [u128; 3],
    pub c_const: f64,
    pub ceiling: f64,
}

/// Iteration ceiling `t_refine·log2(ε0·n^n·((1 + C/n^(2-2/(n+1)))/(1-C))·maxΛ)`.
pub fn iteration_ceiling(t_refine: u64, eps0: f64, n: usize, c_const: f64, max_lambda: f64) -> f64 {
    let nf = n as f64;
    let shape = (1.0 + c_const / nf.powf(2.0 - 2.0 / (nf + 1.0))) / (1.0 - c_const);
    t_refine as f64 * (eps0 * nf.powf(nf) * shape * max_lambda).log2()
}

pub fn diagnostics(
    trace: &[IterationRecord],
    sys: &ChcSystem,
    cfg: &SolveConfig,
    c_const: f64,
) -> Result<Diagnostics, SolveError> {
    let not_q = negate_dnf(&sys.post, cfg.dnf_cap)?;
    let lambda_hat = [
        lattice_overestimate(&sys.pre, sys),
        lattice_overestimate(&sys.guard, sys),
        lattice_overestimate(&not_q, sys),
    ];
    let max_lambda = lambda_hat.iter().copied().max().unwrap_or(0) as f64;
    Ok(Diagnostics {
        rows: trace.to_vec(),
        lambda_hat,
        c_const,
        ceiling: iteration_ceiling(
            cfg.t_refine,
            to_f64(&cfg.eps0),
            sys.dim(),
            c_const,
            max_lambda,
        ),
    })
}

impl Diagnostics {
    pub fn render(&self) -> String {
        let mut out = String::from(
            "iter  epsilon  |+|  |->|  |-|  c+  c->  c-  kappa_inf  lambda  sa_steps  ms\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{}  {}  {}  {}  {}  {}  {}  {}  {:.3}  {:.3}  {}  {}\n",
                r.iteration,
                r.epsilon,
                r.plus,
                r.implications,
                r.minus,
                r.plus_cex,
                r.ice_cex,
                r.minus_cex,
                r.kappa_inf,
                r.lambda_arrow,
                r.sa_steps,
                r.wall_ms
            ));
        }
        out.push_str(&format!(
            "diagnostic only (non-binding): iteration ceiling {:.2} with C = {}, lattice estimates P/B/notQ = {}/{}/{}\n",
            self.ceiling, self.c_const, self.lambda_hat[0], self.lambda_hat[1], self.lambda_hat[2]
        ));
        out
    }
}
