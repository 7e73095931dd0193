mod settings;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use loopinv::anneal::Telemetry;
use loopinv::ir::{
    lower_document, parse_chc, parse_formula, print_document, serialize_invariant, to_dnf,
    InvariantFormat,
};
use loopinv::num_rational::BigRational;
use loopinv::sampling::{randomized_epsilon_net, NetParams};
use loopinv::solve::diagnostics;
use loopinv::verify::{
    brute_force_verify, CexDataset, InvariantChecker, OracleChecker, SmtChecker, VerifyError,
};
use loopinv::{negate_dnf, solve, ChcSystem, DnfFormula, SolveOutcome, SolveStatus};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use settings::{parse_rational, CheckerKind, Overrides, Settings};

#[derive(Parser)]
#[command(
    name = "loopinv",
    version,
    about = "Loop-invariant synthesis for single-loop CHC systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for an invariant.
    Solve {
        input: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Print a JSON result record instead of text.
        #[arg(long)]
        json: bool,
        /// Write per-iteration and annealing records as JSON lines.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        /// Print the per-iteration diagnostic table.
        #[arg(long)]
        diagnostics: bool,
        /// Constant for the diagnostic iteration ceiling.
        #[arg(long, default_value_t = 0.5)]
        ceiling_c: f64,
    },
    /// Check an invariant file with the SMT solver.
    Verify {
        input: PathBuf,
        invariant: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        json: bool,
    },
    /// Check an invariant file by enumerating the state box.
    OracleVerify {
        input: PathBuf,
        invariant: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        json: bool,
    },
    /// Print an epsilon-net of one region of the system, one state per line.
    SampleNet {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Region::Pre)]
        region: Region,
        #[arg(long, default_value = "1/2")]
        epsilon: String,
        #[arg(long, default_value = "9/10")]
        delta: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve every .chc file in a directory and print a CSV summary.
    Bench {
        dir: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Also print each run's JSON result record to stderr.
        #[arg(long)]
        json: bool,
    },
    /// Parse and lower a system, then print it back.
    Parse { input: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Region {
    Pre,
    Guard,
    NotPost,
}

const EXIT_USAGE: u8 = 1;
const EXIT_NO_INVARIANT: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Solve {
            input,
            overrides,
            json,
            trace,
            diagnostics,
            ceiling_c,
        } => cmd_solve(
            &input,
            &overrides,
            json,
            trace.as_deref(),
            diagnostics,
            ceiling_c,
        ),
        Command::Verify {
            input,
            invariant,
            overrides,
            json,
        } => cmd_verify(&input, &invariant, &overrides, json, false),
        Command::OracleVerify {
            input,
            invariant,
            overrides,
            json,
        } => cmd_verify(&input, &invariant, &overrides, json, true),
        Command::SampleNet {
            input,
            region,
            epsilon,
            delta,
            seed,
        } => cmd_sample_net(&input, region, &epsilon, &delta, seed),
        Command::Bench {
            dir,
            overrides,
            json,
        } => cmd_bench(&dir, &overrides, json),
        Command::Parse { input } => cmd_parse(&input),
    }
}

struct Loaded {
    vars: Vec<String>,
    sys: ChcSystem,
}

fn load(path: &Path, settings: &Settings) -> Result<Loaded> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc = parse_chc(&text).map_err(|e| anyhow!("{}:{e}", path.display()))?;
    let sys = lower_document(
        &doc,
        settings.solve.dnf_cap,
        settings.solve.verify.oracle_limit,
    )
    .with_context(|| format!("lowering {}", path.display()))?;
    Ok(Loaded {
        vars: doc.variables,
        sys,
    })
}

fn make_checker(settings: &Settings) -> Box<dyn InvariantChecker> {
    match settings.checker {
        CheckerKind::Smt => Box::new(SmtChecker::new(
            settings.solver.clone(),
            settings.solve.verify.clone(),
        )),
        CheckerKind::Oracle => Box::new(OracleChecker {
            cfg: settings.solve.verify.clone(),
        }),
    }
}

fn exit_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Invariant => 0,
        SolveStatus::SaFail | SolveStatus::Exhausted => EXIT_NO_INVARIANT,
        SolveStatus::SolverError => EXIT_SOLVER,
    }
}

/// The JSON result record. Holds no timing fields, so equal inputs give
/// byte-identical records.
fn result_record(
    outcome: &SolveOutcome,
    vars: &[String],
    settings: &Settings,
) -> serde_json::Value {
    let invariant = outcome.invariant.as_ref().map(|inv| {
        json!({
            "dnf": serialize_invariant(inv, vars, InvariantFormat::DnfText),
            "smtlib": serialize_invariant(inv, vars, InvariantFormat::SmtlibTerm),
        })
    });
    json!({
        "status": outcome.status.label(),
        "invariant": invariant,
        "iterations": outcome.iterations,
        "seed": settings.solve.seed,
        "error": outcome.error.as_ref().map(ToString::to_string),
        "config": settings.to_map(),
    })
}

fn cmd_solve(
    input: &Path,
    overrides: &Overrides,
    as_json: bool,
    trace: Option<&Path>,
    show_diagnostics: bool,
    ceiling_c: f64,
) -> Result<u8> {
    let settings = overrides.resolve()?;
    let loaded = load(input, &settings)?;
    let telemetry = match trace {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            Some(Telemetry::new(Box::new(BufWriter::new(f))))
        }
        None => None,
    };
    let mut checker = make_checker(&settings);
    let outcome = solve(
        &loaded.sys,
        &settings.solve,
        checker.as_mut(),
        telemetry.as_ref(),
    )?;
    let record = result_record(&outcome, &loaded.vars, &settings);
    if let Some(tel) = &telemetry {
        let mut last = record.clone();
        last["kind"] = "outcome".into();
        tel.record(&last);
    }
    drop(telemetry);

    if as_json {
        println!("{}", serde_json::to_string(&record)?);
    } else {
        println!("status: {}", outcome.status.label());
        println!("iterations: {}", outcome.iterations);
        if let Some(inv) = &outcome.invariant {
            println!(
                "invariant: {}",
                serialize_invariant(inv, &loaded.vars, InvariantFormat::DnfText)
            );
            println!(
                "smtlib: {}",
                serialize_invariant(inv, &loaded.vars, InvariantFormat::SmtlibTerm)
            );
        }
        if let Some(e) = &outcome.error {
            println!("error: {e}");
        }
        println!("config:");
        for (k, v) in settings.to_map() {
            println!("  {k} = {v}");
        }
    }
    if show_diagnostics {
        let report = diagnostics(&outcome.trace, &loaded.sys, &settings.solve, ceiling_c)?;
        eprint!("{}", report.render());
    }
    Ok(exit_code(outcome.status))
}

fn load_invariant(path: &Path, vars: &[String], cap: usize) -> Result<DnfFormula> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let f = parse_formula(&text, vars).map_err(|e| anyhow!("{}:{e}", path.display()))?;
    Ok(to_dnf(&f, vars, cap)?)
}

fn cex_json(cex: &CexDataset) -> serde_json::Value {
    let states = |set: &std::collections::BTreeSet<loopinv::StateVector>| {
        set.iter().map(|s| s.coords().to_vec()).collect::<Vec<_>>()
    };
    json!({
        "plus": states(&cex.plus_cex),
        "implications": cex
            .ice_cex
            .iter()
            .map(|(h, t)| [h.coords().to_vec(), t.coords().to_vec()])
            .collect::<Vec<_>>(),
        "minus": states(&cex.minus_cex),
    })
}

fn cmd_verify(
    input: &Path,
    invariant: &Path,
    overrides: &Overrides,
    as_json: bool,
    oracle: bool,
) -> Result<u8> {
    let settings = overrides.resolve()?;
    let loaded = load(input, &settings)?;
    let inv = load_invariant(invariant, &loaded.vars, settings.solve.dnf_cap)?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.solve.seed);
    let result: Result<(bool, CexDataset), VerifyError> = if oracle {
        brute_force_verify(&inv, &loaded.sys, &settings.solve.verify)
    } else {
        let mut checker = SmtChecker::new(settings.solver.clone(), settings.solve.verify.clone());
        checker
            .check(&inv, &loaded.sys, &mut rng)
            .map(|v| (v.correct, v.cex))
    };
    let (correct, cex) = match result {
        Ok(r) => r,
        Err(e @ VerifyError::BoxTooLarge { .. }) => bail!(e),
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(EXIT_SOLVER);
        }
    };
    if as_json {
        println!(
            "{}",
            serde_json::to_string(&json!({ "valid": correct, "counterexamples": cex_json(&cex) }))?
        );
    } else {
        println!("{}", if correct { "valid" } else { "invalid" });
        for s in &cex.plus_cex {
            println!("fact: {s}");
        }
        for (h, t) in &cex.ice_cex {
            println!("inductive: {h} -> {t}");
        }
        for s in &cex.minus_cex {
            println!("query: {s}");
        }
    }
    Ok(if correct { 0 } else { EXIT_NO_INVARIANT })
}

fn cmd_sample_net(input: &Path, region: Region, eps: &str, delta: &str, seed: u64) -> Result<u8> {
    let settings = Settings::default();
    let loaded = load(input, &settings)?;
    let sys = &loaded.sys;
    let eps: BigRational = parse_rational(eps)?;
    let delta: BigRational = parse_rational(delta)?;
    let formula = match region {
        Region::Pre => sys.pre.clone(),
        Region::Guard => sys.guard.clone(),
        Region::NotPost => negate_dnf(&sys.post, settings.solve.dnf_cap)?,
    };
    let params = NetParams::for_dim(eps, delta, sys.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = randomized_epsilon_net(&formula, &params, &sys.space, &mut rng)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for s in net {
        writeln!(out, "{s}")?;
    }
    Ok(0)
}

fn cmd_bench(dir: &Path, overrides: &Overrides, as_json: bool) -> Result<u8> {
    let settings = overrides.resolve()?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "chc"))
        .collect();
    files.sort();
    println!("benchmark,status,iterations,seconds,seed");
    for path in files {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let clock = Instant::now();
        let (status, iterations, record) = match load(&path, &settings) {
            Err(e) => {
                log::error!("{e:#}");
                ("parse_error".to_string(), 0, None)
            }
            Ok(loaded) => {
                let mut checker = make_checker(&settings);
                match solve(&loaded.sys, &settings.solve, checker.as_mut(), None) {
                    Ok(o) => (
                        o.status.label().to_string(),
                        o.iterations,
                        Some(result_record(&o, &loaded.vars, &settings)),
                    ),
                    Err(e) => {
                        log::error!("{name}: {e}");
                        ("config_error".to_string(), 0, None)
                    }
                }
            }
        };
        println!(
            "{name},{status},{iterations},{:.3},{}",
            clock.elapsed().as_secs_f64(),
            settings.solve.seed
        );
        if as_json {
            if let Some(mut r) = record {
                r["benchmark"] = name.into();
                eprintln!("{}", serde_json::to_string(&r)?);
            }
        }
    }
    Ok(0)
}

fn cmd_parse(input: &Path) -> Result<u8> {
    let text =
        std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let doc = parse_chc(&text).map_err(|e| anyhow!("{}:{e}", input.display()))?;
    let settings = Settings::default();
    let sys = lower_document(
        &doc,
        settings.solve.dnf_cap,
        settings.solve.verify.oracle_limit,
    )?;
    print!("{}", print_document(&doc));
    let (pd, pc) = sys.pre.shape();
    let (bd, bc) = sys.guard.shape();
    let (qd, qc) = sys.post.shape();
    println!(
        "; {} variables, box [{}, {}], pre {pd}x{pc}, guard {bd}x{bc}, post {qd}x{qc}, {} blocks",
        sys.dim(),
        sys.space.lo(),
        sys.space.hi(),
        sys.trans.block_count()
    );
    Ok(0)
}
