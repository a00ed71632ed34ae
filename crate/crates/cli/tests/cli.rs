//! End-to-end checks of the `mfrl` binary: exit codes, artifacts, determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

use mfrl_core::hjb::benchmarks;

fn mfrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfrl")).args(args).output().expect("run mfrl")
}

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, content).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn fd_plan_writes_value_file_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write(
        dir.path(),
        "plan.json",
        r#"{"version":1,"problem":{"benchmark":{"name":"linear"}},"n":2,"solver":{"kind":"fd","mesh":16}}"#,
    );
    let out = dir.path().join("v.bin");
    let o = mfrl(&["solve", "--plan", s(&plan), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bytes = std::fs::read(&out).unwrap();
    assert_eq!(&bytes[..5], b"MFRL1");
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("v.bin.json")).unwrap()).unwrap();
    assert_eq!(summary["N"], 2);
    assert_eq!(summary["mesh"], 16);
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("key,value\n"));
}

#[test]
fn mc_plan_reports_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write(
        dir.path(),
        "plan.json",
        r#"{"version":1,"problem":{"benchmark":{"name":"null"}},"n":2,"seed":4,
            "solver":{"kind":"mc","t":0.0,"atoms":[0.0,0.0],"n_paths":2000,"n_steps":20}}"#,
    );
    let out = dir.path().join("mc.json");
    let o = mfrl(&["--format", "json", "solve", "--plan", s(&plan), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let exact = (-1.0f64).exp();
    let (mean, se) = (v["mean"].as_f64().unwrap(), v["std_error"].as_f64().unwrap());
    assert!((mean - exact).abs() <= 4.0 * se, "{mean} ± {se} vs {exact}");
    assert_eq!(std::fs::read_to_string(&out).unwrap(), String::from_utf8(o.stdout).unwrap());
}

#[test]
fn oversized_grid_is_a_precondition_failure() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write(
        dir.path(),
        "plan.json",
        r#"{"version":1,"problem":{"benchmark":{"name":"linear"}},"n":6,"solver":{"kind":"fd","mesh":128}}"#,
    );
    let o = mfrl(&["solve", "--plan", s(&plan), "--out", s(&dir.path().join("v.bin"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("mesh^N <= 10000000"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn schema_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    for (name, text) in [
        ("malformed.json", "{\"version\":1,"),
        (
            "unknown.json",
            r#"{"version":1,"problem":{"benchmark":{"name":"linear"}},"n":2,"solver":{"kind":"fd","mesh":16},"extra":1}"#,
        ),
        (
            "version.json",
            r#"{"version":7,"problem":{"benchmark":{"name":"linear"}},"n":2,"solver":{"kind":"fd","mesh":16}}"#,
        ),
        (
            "bench.json",
            r#"{"version":1,"problem":{"benchmark":{"name":"nope"}},"n":2,"solver":{"kind":"fd","mesh":16}}"#,
        ),
    ] {
        let plan = write(dir.path(), name, text);
        let o = mfrl(&["solve", "--plan", s(&plan), "--out", s(&out)]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", stderr(&o));
    }
    let o = mfrl(&["solve", "--plan", s(&dir.path().join("missing.json")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

fn rate_plan(problem: Value, n_list: Value) -> String {
    json!({
        "version": 1,
        "problem": problem,
        "n_list": n_list,
        "configurations": 6,
        "time_points": 4,
        "solver": {"n_paths": 256, "n_steps": 32},
        "seed": 5,
    })
    .to_string()
}

#[test]
fn rate_requires_three_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write(dir.path(), "plan.json", &rate_plan(json!(benchmarks::null(0.0)), json!([4, 8])));
    let o = mfrl(&["rate", "--plan", s(&plan), "--out", s(&dir.path().join("r"))]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!dir.path().join("r.csv").exists());
}

#[test]
fn rate_rejects_nonlinear_problem() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write(dir.path(), "plan.json", &rate_plan(json!(benchmarks::quadratic(0.0)), json!([2, 4, 8])));
    let o = mfrl(&["rate", "--plan", s(&plan), "--out", s(&dir.path().join("r"))]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn null_rate_report_is_within_budget_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write(dir.path(), "plan.json", &rate_plan(json!(benchmarks::null(0.0)), json!([2, 4, 8])));
    let run = |stem: &str| {
        let out = dir.path().join(stem);
        let o = mfrl(&["rate", "--plan", s(&plan), "--out", s(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        (String::from_utf8(o.stdout).unwrap(), std::fs::read_to_string(out.with_extension("csv")).unwrap())
    };
    let (stdout, csv) = run("a");
    assert_eq!(stdout, csv);
    assert!(csv.starts_with("N,alpha,alpha_cbrt,sup_error,mc_std,notes\n"));
    assert_eq!(csv.lines().count(), 4);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
    for row in report["rows"].as_array().unwrap() {
        let (e, b) = (row["sup_error"].as_f64().unwrap(), row["noise_budget"].as_f64().unwrap());
        assert!(e <= b, "N={}: {e} > {b}", row["N"]);
    }
    assert_eq!(run("b").1, csv);
    // --seed overrides the plan seed
    let o = mfrl(&["--seed", "6", "rate", "--plan", s(&plan), "--out", s(&dir.path().join("c"))]);
    assert!(o.status.success());
    assert_ne!(std::fs::read_to_string(dir.path().join("c.csv")).unwrap(), csv);
}

#[test]
fn metric_command() {
    let dir = tempfile::tempdir().unwrap();
    let d0 = write(dir.path(), "d0.json", r#"{"kind":"empirical","d":1,"atoms":[[0.0]]}"#);
    let dpi = write(dir.path(), "dpi.json", r#"{"kind":"empirical","d":1,"atoms":[[3.141592653589793]]}"#);
    let d2 = write(dir.path(), "d2.json", r#"{"kind":"empirical","d":2,"atoms":[[0.0,1.0]]}"#);
    let bad = write(dir.path(), "bad.json", r#"{"kind":"empirical","d":1}"#);

    let o = mfrl(&["metric", s(&d0), s(&d0)]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "0\n");

    // (2/π)·2·Σ_{odd l ≤ 64} (1+l²)^{-3}, square-rooted
    let o = mfrl(&["metric", s(&d0), s(&dpi), "--order", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "0.400642369690\n");

    assert_eq!(mfrl(&["metric", s(&d0), s(&d2)]).status.code(), Some(2));
    assert_eq!(mfrl(&["metric", s(&d0), s(&bad)]).status.code(), Some(2));
}

#[test]
fn complexity_and_probe_commands() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write(
        dir.path(),
        "c.json",
        r#"{"version":1,"density":{"uniform":{"m":128}},"n_list":[8,32,128],"n_trials":100,"seed":1}"#,
    );
    let out = dir.path().join("c.csv");
    let o = mfrl(&["complexity", "--plan", s(&plan), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 4);

    let probe = json!({
        "version": 1,
        "problem": {"benchmark": {"name": "linear"}},
        "n": 1,
        "mesh": 16,
        "max_slices": 32,
        "eps_list": [0.2, 0.1, 0.05],
        "targets": [{"t": 0.5, "z": 0.1, "mu": {"kind": "empirical", "d": 1, "atoms": [[std::f64::consts::PI]]}}],
        "time_nodes": 17,
        "shift_nodes": 64,
    });
    let plan = write(dir.path(), "p.json", &probe.to_string());
    let o = mfrl(&["probe", "--plan", s(&plan)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.starts_with("epsilon,t_gap,z_gap,rho_gap,fit_slope\n"));
    assert_eq!(csv.lines().count(), 5);

    let short = probe.to_string().replace("[0.2,0.1,0.05]", "[0.2,0.1]");
    let plan = write(dir.path(), "short.json", &short);
    assert_eq!(mfrl(&["probe", "--plan", s(&plan)]).status.code(), Some(2));
}
