//! SMT-LIB 2 encoding and a line-oriented solver session.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ClauseKind, VerifyError};
use crate::lia::{ChcSystem, DnfFormula, LinearPredicate, StateVector};

/// Strict SMT-LIB numeral: negatives as `(- k)`.
pub fn numeral(v: i64) -> String {
    if v < 0 {
        format!("(- {})", v.unsigned_abs())
    } else {
        v.to_string()
    }
}

fn linear(coeffs: &[i64], names: &[String], constant: i64) -> String {
    let mut terms: Vec<String> = coeffs
        .iter()
        .zip(names)
        .filter(|(w, _)| **w != 0)
        .map(|(&w, name)| {
            if w == 1 {
                name.clone()
            } else {
                format!("(* {} {name})", numeral(w))
            }
        })
        .collect();
    if constant != 0 || terms.is_empty() {
        terms.push(numeral(constant));
    }
    if terms.len() == 1 {
        terms.pop().expect("one term")
    } else {
        format!("(+ {})", terms.join(" "))
    }
}

fn predicate(p: &LinearPredicate, names: &[String]) -> String {
    format!("(<= {} {})", linear(&p.coeffs, names, 0), numeral(p.bound))
}

/// A DNF over the given symbol names.
pub fn formula(f: &DnfFormula, names: &[String]) -> String {
    if f.is_false() {
        return "false".to_string();
    }
    let cubes: Vec<String> = f
        .cubes()
        .iter()
        .map(|cube| {
            let preds: Vec<String> = cube
                .predicates
                .iter()
                .map(|p| predicate(p, names))
                .collect();
            format!("(and {})", preds.join(" "))
        })
        .collect();
    format!("(or {})", cubes.join(" "))
}

pub fn state_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i}")).collect()
}

pub fn primed_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("sp{i}")).collect()
}

fn in_box(names: &[String], lo: i64, hi: i64) -> String {
    let parts: Vec<String> = names
        .iter()
        .map(|v| format!("(<= {} {v} {})", numeral(lo), numeral(hi)))
        .collect();
    format!("(and {})", parts.join(" "))
}

fn transition(sys: &ChcSystem, s: &[String], sp: &[String]) -> String {
    let blocks: Vec<String> = sys
        .trans
        .blocks()
        .iter()
        .map(|block| {
            let maps: Vec<String> = block
                .maps
                .iter()
                .map(|map| {
                    let eqs: Vec<String> = map
                        .matrix
                        .iter()
                        .zip(&map.offset)
                        .zip(sp)
                        .map(|((row, &o), target)| format!("(= {target} {})", linear(row, s, o)))
                        .collect();
                    format!("(and {})", eqs.join(" "))
                })
                .collect();
            format!("(and {} (or {}))", formula(&block.guard, s), maps.join(" "))
        })
        .collect();
    if blocks.is_empty() {
        "false".to_string()
    } else {
        format!("(or {})", blocks.join(" "))
    }
}

/// Quantifier-free refutation script for one clause, without `check-sat`.
/// The clause is valid iff the assertions are unsatisfiable.
pub fn encode_clause_body(kind: ClauseKind, inv: &DnfFormula, sys: &ChcSystem) -> String {
    let n = sys.dim();
    let s = state_names(n);
    let sp = primed_names(n);
    let (lo, hi) = (sys.space.lo(), sys.space.hi());
    let mut out = String::from("(set-logic QF_LIA)\n");
    let declared: Vec<&String> = match kind {
        ClauseKind::Inductive => s.iter().chain(&sp).collect(),
        _ => s.iter().collect(),
    };
    for v in &declared {
        writeln!(out, "(declare-const {v} Int)").unwrap();
    }
    writeln!(out, "(assert {})", in_box(&s, lo, hi)).unwrap();
    match kind {
        ClauseKind::Fact => {
            writeln!(out, "(assert {})", formula(&sys.pre, &s)).unwrap();
            writeln!(out, "(assert (not {}))", formula(inv, &s)).unwrap();
        }
        ClauseKind::Inductive => {
            writeln!(out, "(assert {})", in_box(&sp, lo, hi)).unwrap();
            writeln!(out, "(assert {})", formula(inv, &s)).unwrap();
            writeln!(out, "(assert {})", formula(&sys.guard, &s)).unwrap();
            writeln!(out, "(assert {})", transition(sys, &s, &sp)).unwrap();
            writeln!(out, "(assert (not {}))", formula(inv, &sp)).unwrap();
        }
        ClauseKind::Query => {
            writeln!(out, "(assert {})", formula(inv, &s)).unwrap();
            writeln!(out, "(assert (not {}))", formula(&sys.post, &s)).unwrap();
        }
    }
    out
}

/// Full single-query script for one clause.
pub fn encode_clause(kind: ClauseKind, inv: &DnfFormula, sys: &ChcSystem) -> String {
    let mut out = encode_clause_body(kind, inv, sys);
    out.push_str("(check-sat)\n");
    out
}

/// `Σ_i |s_i - t_i| >= d0` with auxiliary absolute values named `{tag}_i`.
pub fn dispersion(names: &[String], t: &StateVector, d0: u64, tag: &str) -> String {
    let mut out = String::new();
    let mut aux = Vec::with_capacity(names.len());
    for (i, (v, &ti)) in names.iter().zip(t.coords()).enumerate() {
        let a = format!("{tag}_{i}");
        let u = format!("(- {v} {})", numeral(ti));
        writeln!(out, "(declare-const {a} Int)").unwrap();
        writeln!(
            out,
            "(assert (and (>= {a} {u}) (>= {a} (- {u})) (or (= {a} {u}) (= {a} (- {u})))))"
        )
        .unwrap();
        aux.push(a);
    }
    let sum = if aux.len() == 1 {
        aux[0].clone()
    } else {
        format!("(+ {})", aux.join(" "))
    };
    writeln!(out, "(assert (>= {sum} {d0}))").unwrap();
    out
}

/// How solver processes are reused between clauses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SolverMode {
    /// A new process for every clause.
    #[default]
    FreshProcess,
    /// One process, `(reset)` between clauses.
    Reset,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub path: PathBuf,
    pub args: Vec<String>,
    pub timeout_ms: u64,
    pub mode: SolverMode,
    /// When set, every clause transcript is mirrored here.
    pub audit_dir: Option<PathBuf>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::from("z3"),
            args: vec!["-in".to_string()],
            timeout_ms: 30_000,
            mode: SolverMode::FreshProcess,
            audit_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckResult {
    Sat,
    Unsat,
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Process {
    fn spawn(cfg: &SolverConfig) -> Result<Self, VerifyError> {
        let mut child = Command::new(&cfg.path)
            .args(&cfg.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| VerifyError::Spawn {
                path: cfg.path.display().to_string(),
                message: e.to_string(),
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines: rx,
        })
    }
}

impl Drop for Process {
    fn drop(&mut self) {
        let _ = writeln!(self.stdin, "(exit)");
        let _ = self.stdin.flush();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A solver connection that hands out one clause session at a time.
pub struct Solver {
    cfg: SolverConfig,
    process: Option<Process>,
    transcript: String,
    audit_counter: usize,
}

impl Solver {
    pub fn new(cfg: SolverConfig) -> Self {
        Self {
            cfg,
            process: None,
            transcript: String::new(),
            audit_counter: 0,
        }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Starts a clause: fresh process or `(reset)` depending on the mode.
    pub fn begin(&mut self) -> Result<(), VerifyError> {
        self.transcript.clear();
        match self.cfg.mode {
            SolverMode::FreshProcess => {
                self.process = Some(Process::spawn(&self.cfg)?);
            }
            SolverMode::Reset => {
                if self.process.is_none() {
                    self.process = Some(Process::spawn(&self.cfg)?);
                } else {
                    self.send("(reset)\n")?;
                }
            }
        }
        Ok(())
    }

    /// Ends a clause, writing the audit transcript if configured.
    pub fn end(&mut self, label: &str) {
        if let Some(dir) = &self.cfg.audit_dir {
            self.audit_counter += 1;
            let path = dir.join(format!("{:04}-{label}.smt2", self.audit_counter));
            if let Err(e) =
                std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&path, &self.transcript))
            {
                log::warn!("could not write audit script {}: {e}", path.display());
            }
        }
        if self.cfg.mode == SolverMode::FreshProcess {
            self.process = None;
        }
    }

    pub fn send(&mut self, text: &str) -> Result<(), VerifyError> {
        self.transcript.push_str(text);
        let proc = self.process.as_mut().ok_or(VerifyError::Protocol {
            message: "no solver process".into(),
        })?;
        proc.stdin
            .write_all(text.as_bytes())
            .and_then(|_| proc.stdin.flush())
            .map_err(|e| VerifyError::Io(e.to_string()))
    }

    fn read_line(&mut self) -> Result<String, VerifyError> {
        let timeout = Duration::from_millis(self.cfg.timeout_ms);
        let proc = self.process.as_mut().ok_or(VerifyError::Protocol {
            message: "no solver process".into(),
        })?;
        loop {
            match proc.lines.recv_timeout(timeout) {
                Ok(line) if line.trim().is_empty() => continue,
                Ok(line) => return Ok(line),
                Err(RecvTimeoutError::Timeout) => {
                    self.process = None;
                    return Err(VerifyError::Timeout {
                        ms: self.cfg.timeout_ms,
                    });
                }
                Err(RecvTimeoutError::Disconnected) => {
                    self.process = None;
                    return Err(VerifyError::Protocol {
                        message: "solver closed its output".into(),
                    });
                }
            }
        }
    }

    pub fn check_sat(&mut self) -> Result<CheckResult, VerifyError> {
        self.send("(check-sat)\n")?;
        let line = self.read_line()?;
        match line.trim() {
            "sat" => Ok(CheckResult::Sat),
            "unsat" => Ok(CheckResult::Unsat),
            "unknown" => Err(VerifyError::Protocol {
                message: "solver answered unknown".into(),
            }),
            other => Err(VerifyError::Protocol {
                message: format!("unexpected solver output `{other}`"),
            }),
        }
    }

    /// Values of `names` in the current model.
    pub fn get_values(&mut self, names: &[String]) -> Result<Vec<i64>, VerifyError> {
        self.send(&format!("(get-value ({}))\n", names.join(" ")))?;
        let mut text = String::new();
        let mut depth: i64 = 0;
        loop {
            let line = self.read_line()?;
            for ch in line.chars() {
                match ch {
                    '(' => depth += 1,
                    ')' => depth -= 1,
                    _ => {}
                }
            }
            text.push_str(&line);
            text.push(' ');
            if depth <= 0 {
                break;
            }
        }
        let values = parse_values(&text)?;
        names
            .iter()
            .map(|n| {
                values.get(n).copied().ok_or_else(|| VerifyError::Protocol {
                    message: format!("model has no value for `{n}`"),
                })
            })
            .collect()
    }
}

/// Parses `((s0 1) (s1 (- 3)))`.
pub fn parse_values(text: &str) -> Result<HashMap<String, i64>, VerifyError> {
    let protocol = |m: &str| VerifyError::Protocol {
        message: format!("{m} in `{}`", text.trim()),
    };
    let tokens: Vec<String> = text
        .replace('(', " ( ")
        .replace(')', " ) ")
        .split_whitespace()
        .map(str::to_string)
        .collect();
    if tokens.first().map(String::as_str) != Some("(") {
        return Err(protocol("expected `(`"));
    }
    let mut out = HashMap::new();
    let mut i = 1;
    while i < tokens.len() && tokens[i] != ")" {
        if tokens[i] != "(" {
            return Err(protocol("expected a binding"));
        }
        let name = tokens
            .get(i + 1)
            .ok_or_else(|| protocol("truncated binding"))?
            .clone();
        i += 2;
        let value = match tokens.get(i).map(String::as_str) {
            Some("(") => {
                if tokens.get(i + 1).map(String::as_str) != Some("-") {
                    return Err(protocol("unsupported value"));
                }
                let mag: i64 = tokens
                    .get(i + 2)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| protocol("bad integer"))?;
                if tokens.get(i + 3).map(String::as_str) != Some(")") {
                    return Err(protocol("expected `)`"));
                }
                i += 4;
                -mag
            }
            Some(t) => {
                let v: i64 = t.parse().map_err(|_| protocol("bad integer"))?;
                i += 1;
                v
            }
            None => return Err(protocol("truncated binding")),
        };
        if tokens.get(i).map(String::as_str) != Some(")") {
            return Err(protocol("expected `)`"));
        }
        i += 1;
        out.insert(name, value);
    }
    Ok(out)
}
