//! Effective run settings: defaults, then the config file, then flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use loopinv::num_rational::BigRational;
use loopinv::verify::{SolverConfig, SolverMode};
use loopinv::{default_hyperparameters, SolveConfig};

pub const SOLVER_ENV: &str = "LOOPINV_SOLVER";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckerKind {
    Smt,
    Oracle,
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub solve: SolveConfig,
    pub solver: SolverConfig,
    pub checker: CheckerKind,
}

/// Flags that mirror config-file keys (`--t-refine` is `t_refine`).
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Config file of `key = value` lines.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Cubes per candidate.
    #[arg(long)]
    pub d: Option<String>,
    /// Predicates per cube.
    #[arg(long)]
    pub c: Option<String>,
    /// Initial epsilon (`p/q` or decimal).
    #[arg(long)]
    pub eps0: Option<String>,
    /// Net success probability.
    #[arg(long)]
    pub delta0: Option<String>,
    /// Iterations between epsilon halvings.
    #[arg(long)]
    pub t_refine: Option<String>,
    /// Outer iteration budget.
    #[arg(long)]
    pub ds_t_max: Option<String>,
    /// Counterexamples per clause.
    #[arg(long)]
    pub cex_max: Option<String>,
    /// L1 dispersion radius between counterexamples.
    #[arg(long)]
    pub d0: Option<String>,
    /// Iterated implication pair depth.
    #[arg(long)]
    pub k0: Option<String>,
    /// Cost normalizer knee.
    #[arg(long)]
    pub alpha: Option<String>,
    /// Cost normalizer slope.
    #[arg(long)]
    pub beta: Option<String>,
    /// Target mean acceptance for the initial temperature.
    #[arg(long)]
    pub a0: Option<String>,
    /// Tolerance of the initial temperature search.
    #[arg(long)]
    pub eps_t: Option<String>,
    /// Random-walk length for the initial temperature.
    #[arg(long)]
    pub t_rw: Option<String>,
    /// Trials for the initial invariant.
    #[arg(long)]
    pub l0: Option<String>,
    /// Annealing workers.
    #[arg(long)]
    pub workers: Option<String>,
    /// Comma-separated, one entry per worker.
    #[arg(long)]
    pub k_list: Option<String>,
    /// Annealing steps per worker per iteration.
    #[arg(long)]
    pub t_max: Option<String>,
    /// Steps between worker checkpoints.
    #[arg(long)]
    pub t_check: Option<String>,
    /// Largest state box the brute-force oracle enumerates.
    #[arg(long)]
    pub oracle_limit: Option<String>,
    /// Cube cap for DNF negation and conjunction.
    #[arg(long)]
    pub dnf_cap: Option<String>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<String>,
    /// Solver executable; falls back to $LOOPINV_SOLVER, then `z3`.
    #[arg(long)]
    pub solver: Option<String>,
    /// Whitespace-separated solver arguments.
    #[arg(long, allow_hyphen_values = true)]
    pub solver_args: Option<String>,
    /// Per-query solver timeout.
    #[arg(long)]
    pub solver_timeout_ms: Option<String>,
    /// `fresh` or `reset`.
    #[arg(long)]
    pub solver_mode: Option<String>,
    /// Directory that receives every solver script.
    #[arg(long)]
    pub audit_dir: Option<String>,
    /// `smt` or `oracle`.
    #[arg(long)]
    pub checker: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("d", &self.d),
            ("c", &self.c),
            ("eps0", &self.eps0),
            ("delta0", &self.delta0),
            ("t_refine", &self.t_refine),
            ("ds_t_max", &self.ds_t_max),
            ("cex_max", &self.cex_max),
            ("d0", &self.d0),
            ("k0", &self.k0),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("a0", &self.a0),
            ("eps_t", &self.eps_t),
            ("t_rw", &self.t_rw),
            ("l0", &self.l0),
            ("workers", &self.workers),
            ("k_list", &self.k_list),
            ("t_max", &self.t_max),
            ("t_check", &self.t_check),
            ("oracle_limit", &self.oracle_limit),
            ("dnf_cap", &self.dnf_cap),
            ("seed", &self.seed),
            ("solver", &self.solver),
            ("solver_args", &self.solver_args),
            ("solver_timeout_ms", &self.solver_timeout_ms),
            ("solver_mode", &self.solver_mode),
            ("audit_dir", &self.audit_dir),
            ("checker", &self.checker),
        ]
    }

    /// Defaults, then the config file, then flags, then the solver
    /// environment variable if no solver was named.
    pub fn resolve(&self) -> Result<Settings> {
        let mut settings = Settings::default();
        let mut solver_named = false;
        if let Some(path) = &self.config {
            for (key, value) in read_config_file(path)? {
                solver_named |= key == "solver";
                settings
                    .set(&key, &value)
                    .with_context(|| format!("{}: key `{key}`", path.display()))?;
            }
        }
        for (key, value) in self.pairs() {
            if let Some(v) = value {
                solver_named |= key == "solver";
                settings
                    .set(key, v)
                    .with_context(|| format!("flag --{}", key.replace('_', "-")))?;
            }
        }
        if !solver_named {
            if let Ok(path) = std::env::var(SOLVER_ENV) {
                settings.solver.path = PathBuf::from(path);
            }
        }
        // A single-k list is broadcast to the worker count.
        let anneal = &mut settings.solve.anneal;
        if anneal.k_list.len() == 1 && anneal.workers > 1 {
            anneal.k_list = vec![anneal.k_list[0]; anneal.workers];
        }
        settings.solve.validate()?;
        Ok(settings)
    }
}

pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
        out.push((k.trim().replace('-', "_"), v.trim().to_string()));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| anyhow!("`{value}`: {e}"))
}

/// `p/q`, an integer, or a decimal such as `0.25`.
pub fn parse_rational(value: &str) -> Result<BigRational> {
    use loopinv::num_bigint::BigInt;
    if let Some((int, frac)) = value.split_once('.') {
        let digits = format!("{int}{frac}");
        let numer: BigInt = num(&digits)?;
        let denom = BigInt::from(10u32).pow(frac.len() as u32);
        return Ok(BigRational::new(numer, denom));
    }
    num::<BigRational>(value)
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            solve: default_hyperparameters(),
            solver: SolverConfig::default(),
            checker: CheckerKind::Smt,
        }
    }
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let s = &mut self.solve;
        match key {
            "d" => s.d = num(value)?,
            "c" => s.c = num(value)?,
            "eps0" => s.eps0 = parse_rational(value)?,
            "delta0" => s.delta0 = parse_rational(value)?,
            "t_refine" => s.t_refine = num(value)?,
            "ds_t_max" => s.ds_t_max = num(value)?,
            "cex_max" => s.verify.cex_max = num(value)?,
            "d0" => s.verify.d0 = num(value)?,
            "k0" => s.verify.k0 = num(value)?,
            "alpha" => s.anneal.alpha = num(value)?,
            "beta" => s.anneal.beta = num(value)?,
            "a0" => s.anneal.a0 = num(value)?,
            "eps_t" => s.anneal.eps_t = num(value)?,
            "t_rw" => s.anneal.t_rw = num(value)?,
            "l0" => s.anneal.l0 = num(value)?,
            "workers" => s.anneal.workers = num(value)?,
            "k_list" => {
                s.anneal.k_list = value
                    .split(',')
                    .map(|k| num(k.trim()))
                    .collect::<Result<_>>()?;
            }
            "t_max" => s.anneal.t_max = num::<f64>(value)? as u64,
            "t_check" => s.anneal.t_check = num::<f64>(value)? as u64,
            "oracle_limit" => s.verify.oracle_limit = num::<f64>(value)? as u128,
            "dnf_cap" => s.dnf_cap = num(value)?,
            "seed" => s.seed = num(value)?,
            "solver" => self.solver.path = PathBuf::from(value),
            "solver_args" => {
                self.solver.args = value.split_whitespace().map(str::to_string).collect();
            }
            "solver_timeout_ms" => {
                let ms = num(value)?;
                self.solver.timeout_ms = ms;
                s.verify.solver_timeout_ms = ms;
            }
            "solver_mode" => {
                self.solver.mode = match value {
                    "fresh" => SolverMode::FreshProcess,
                    "reset" => SolverMode::Reset,
                    other => bail!("unknown solver mode `{other}` (expected fresh or reset)"),
                }
            }
            "audit_dir" => self.solver.audit_dir = Some(PathBuf::from(value)),
            "checker" => {
                self.checker = match value {
                    "smt" => CheckerKind::Smt,
                    "oracle" => CheckerKind::Oracle,
                    other => bail!("unknown checker `{other}` (expected smt or oracle)"),
                }
            }
            other => bail!("unknown setting `{other}`"),
        }
        Ok(())
    }

    /// Every effective setting, keyed as in the config file.
    pub fn to_map(&self) -> BTreeMap<&'static str, String> {
        let s = &self.solve;
        let a = &s.anneal;
        let v = &s.verify;
        let k_list: Vec<String> = a.k_list.iter().map(i64::to_string).collect();
        BTreeMap::from([
            ("d", s.d.to_string()),
            ("c", s.c.to_string()),
            ("eps0", s.eps0.to_string()),
            ("delta0", s.delta0.to_string()),
            ("t_refine", s.t_refine.to_string()),
            ("ds_t_max", s.ds_t_max.to_string()),
            ("cex_max", v.cex_max.to_string()),
            ("d0", v.d0.to_string()),
            ("k0", v.k0.to_string()),
            ("alpha", a.alpha.to_string()),
            ("beta", a.beta.to_string()),
            ("a0", a.a0.to_string()),
            ("eps_t", a.eps_t.to_string()),
            ("t_rw", a.t_rw.to_string()),
            ("l0", a.l0.to_string()),
            ("workers", a.workers.to_string()),
            ("k_list", k_list.join(",")),
            ("t_max", a.t_max.to_string()),
            ("t_check", a.t_check.to_string()),
            ("oracle_limit", v.oracle_limit.to_string()),
            ("dnf_cap", s.dnf_cap.to_string()),
            ("seed", s.seed.to_string()),
            ("solver", self.solver.path.display().to_string()),
            ("solver_args", self.solver.args.join(" ")),
            ("solver_timeout_ms", self.solver.timeout_ms.to_string()),
            (
                "solver_mode",
                match self.solver.mode {
                    SolverMode::FreshProcess => "fresh",
                    SolverMode::Reset => "reset",
                }
                .to_string(),
            ),
            (
                "checker",
                match self.checker {
                    CheckerKind::Smt => "smt",
                    CheckerKind::Oracle => "oracle",
                }
                .to_string(),
            ),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_lines() {
        let pairs = parse_config("# comment\nd = 2\n t-refine=4 # trailing\n\n").unwrap();
        assert_eq!(
            pairs,
            vec![
                ("d".to_string(), "2".to_string()),
                ("t_refine".to_string(), "4".to_string())
            ]
        );
        assert!(parse_config("nonsense").is_err());
    }

    #[test]
    fn rationals() {
        assert_eq!(
            parse_rational("1/2").unwrap(),
            parse_rational("0.5").unwrap()
        );
        assert_eq!(parse_rational("3").unwrap().to_string(), "3");
    }

    #[test]
    fn every_key_round_trips() {
        let mut s = Settings::default();
        for (k, v) in s.to_map() {
            s.set(k, &v).unwrap();
        }
        assert_eq!(s.to_map(), Settings::default().to_map());
    }
}
