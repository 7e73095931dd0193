use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_loopinv"))
}

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_toy_prints_both_formats() {
    let toy = corpus("toy.chc");
    let o = run(&[
        "solve",
        toy.to_str().unwrap(),
        "--d",
        "1",
        "--c",
        "2",
        "--seed",
        "7",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("status: invariant"));
    assert!(out.contains("invariant: ("));
    assert!(out.contains("smtlib: (or (and"));
    assert!(out.contains("  seed = 7"));
}

#[test]
fn parse_error_has_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.chc");
    std::fs::write(
        &bad,
        "(chc (vars x)\n  (pre (<= z 1)) (guard true) (trans (block true ((x x)))) (post true))",
    )
    .unwrap();
    let o = run(&["parse", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.chc:2:"), "{}", stderr(&o));
}

#[test]
fn usage_error_exits_one() {
    assert_eq!(run(&["solve"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn parse_round_trips_corpus() {
    for entry in std::fs::read_dir(corpus("")).unwrap() {
        let path = entry.unwrap().path();
        let o = run(&["parse", path.to_str().unwrap()]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}: {}",
            path.display(),
            stderr(&o)
        );
        assert!(stderr(&o).is_empty(), "{}: {}", path.display(), stderr(&o));
        assert!(stdout(&o).starts_with("(chc"));
    }
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(
        &cfg,
        "# toy settings\nd = 1\nc = 2\nseed = 3\nt_refine = 4\ncex-max = 2\n",
    )
    .unwrap();
    let toy = corpus("toy.chc");
    let o = run(&[
        "solve",
        toy.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["seed"], 9);
    assert_eq!(v["config"]["t_refine"], "4");
    assert_eq!(v["config"]["cex_max"], "2");
    assert_eq!(v["status"], "invariant");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "colour = blue\n").unwrap();
    let toy = corpus("toy.chc");
    let o = run(&[
        "solve",
        toy.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown setting `colour`"));
}

#[test]
fn missing_solver_is_a_solver_error() {
    let toy = corpus("toy.chc");
    let o = run(&[
        "solve",
        toy.to_str().unwrap(),
        "--solver",
        "/nonexistent/z3",
        "--seed",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
    assert!(stdout(&o).contains("status: solver_error"));
}

#[test]
fn solver_from_environment() {
    let toy = corpus("toy.chc");
    let o = bin()
        .args(["solve", toy.to_str().unwrap(), "--json"])
        .env("LOOPINV_SOLVER", "/nonexistent/solver")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("/nonexistent/solver"));
}

#[test]
fn verify_and_oracle_verify_agree() {
    let dir = tempfile::tempdir().unwrap();
    let toy = corpus("toy.chc");
    let good = dir.path().join("good.inv");
    std::fs::write(&good, "(and (>= x 1) (>= y 1))").unwrap();
    let bad = dir.path().join("bad.inv");
    std::fs::write(&bad, "(>= y 2)").unwrap();
    for cmd in ["verify", "oracle-verify"] {
        let o = run(&[cmd, toy.to_str().unwrap(), good.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
        assert_eq!(stdout(&o).lines().next(), Some("valid"));
        let o = run(&[cmd, toy.to_str().unwrap(), bad.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{cmd}");
        assert!(stdout(&o).contains("fact: 1 1"), "{cmd}: {}", stdout(&o));
    }
}

#[test]
fn sample_net_points_lie_in_region() {
    let toy = corpus("toy.chc");
    let o = run(&["sample-net", toy.to_str().unwrap(), "--region", "pre"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "1 1");
    let o = run(&[
        "sample-net",
        toy.to_str().unwrap(),
        "--region",
        "not-post",
        "--seed",
        "4",
    ]);
    let lines: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert!(lines.len() > 10);
    for l in lines {
        let y: i64 = l.split(' ').nth(1).unwrap().parse().unwrap();
        assert!(y <= 0);
    }
}

#[test]
fn bench_emits_one_row_per_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(corpus("toy.chc"), dir.path().join("a.chc")).unwrap();
    std::fs::copy(corpus("toy.chc"), dir.path().join("b.chc")).unwrap();
    std::fs::write(dir.path().join("c.chc"), "(chc").unwrap();
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let o = run(&[
        "bench",
        dir.path().to_str().unwrap(),
        "--d",
        "1",
        "--c",
        "2",
        "--seed",
        "5",
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows[0], "benchmark,status,iterations,seconds,seed");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("a,invariant,"));
    assert!(rows[3].starts_with("c,parse_error,0,"));
    assert!(rows[1].ends_with(",5"));
    assert_eq!(stderr(&o).lines().filter(|l| l.starts_with('{')).count(), 2);
}

#[test]
fn trace_is_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let toy = corpus("toy.chc");
    let o = run(&[
        "solve",
        toy.to_str().unwrap(),
        "--seed",
        "2",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&trace).unwrap();
    let records: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(records.iter().any(|r| r["kind"] == "iteration"));
    assert_eq!(records.last().unwrap()["kind"], "outcome");
}
