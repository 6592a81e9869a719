//! End-to-end runs of the `dml` binary: exit codes, golden JSON and the
//! mutation fixture.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).to_path_buf()
}

fn fixture(rel: &str) -> String {
    root().join(rel).to_string_lossy().into_owned()
}

fn core_fixture(name: &str) -> String {
    root().join("../dml-core/fixtures").join(name).to_string_lossy().into_owned()
}

fn dml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dml")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Compares against `tests/golden/<name>.json`; `DML_BLESS=1` rewrites it.
fn golden(name: &str, args: &[&str], code: i32) {
    let o = dml(args);
    assert_eq!(o.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    let got: Value = serde_json::from_slice(&o.stdout).expect("JSON output");
    assert_eq!(got["schema_version"], 1);
    let path = root().join("tests/golden").join(format!("{name}.json"));
    if std::env::var_os("DML_BLESS").is_some() {
        std::fs::write(&path, serde_json::to_string_pretty(&got).unwrap() + "\n").unwrap();
    }
    let want: Value = serde_json::from_str(&std::fs::read_to_string(&path).expect("golden file")).unwrap();
    assert_eq!(got, want, "{name} drifted from its golden file");
}

#[test]
fn documented_invocations() {
    let o = dml(&["sat", "--formula", &fixture("fixtures/l_geq3.mso")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("SAT\nwitness: "));

    let o = dml(&["rigid", "--formula", &fixture("fixtures/neq_guard.mso")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("counterexample"));

    let o = dml(&["eval", "--word", "a@1 a@2 a@1", "--formula", &fixture("fixtures/l2.mso")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "true");
}

#[test]
fn negative_verdicts_exit_one() {
    let l2 = fixture("fixtures/l2.mso");
    assert_eq!(dml(&["eval", "-w", "a@1 a@2", "-f", &l2]).status.code(), Some(1));
    assert_eq!(dml(&["sat", "-e", "E x. E y. rigid[succ(x,y)](x,y){x !~ y} & last(x)"]).status.code(), Some(1));
    assert_eq!(dml(&["rigid", "-e", "A x. A y. (x != y -> x !~ y)"]).status.code(), Some(1));
    assert_eq!(dml(&["fma-run", "--fma", &core_fixture("l_arc.fma"), "-w", "a@1 a@2"]).status.code(), Some(1));
    assert_eq!(dml(&["fma-check", "--fma", &core_fixture("l_arc_guess.fma")]).status.code(), Some(1));
    let bad = fixture("tests/data/corrupted_l1.rec");
    assert_eq!(dml(&["analyze", "-p", &bad]).status.code(), Some(1));
}

#[test]
fn usage_and_input_errors_exit_two() {
    assert_eq!(dml(&[]).status.code(), Some(2));
    assert_eq!(dml(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(dml(&["parse", "-e", "E x. (a(x)"]).status.code(), Some(2));
    assert_eq!(dml(&["parse", "-f", "/nonexistent/formula.mso"]).status.code(), Some(2));
    assert_eq!(dml(&["eval", "-e", "a(x)", "-w", "a@1"]).status.code(), Some(2));
    assert_eq!(dml(&["sat", "-e", "A x. A y. (x != y -> x !~ y)"]).status.code(), Some(2));
    assert_eq!(dml(&["sat", "-e", "a(x)"]).status.code(), Some(2));
    assert_eq!(dml(&["compile", "-e", "A x. A y. (x != y -> x !~ y)"]).status.code(), Some(2));
    let o = dml(&["selftest", "--filter", "no-such-check"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "));
}

#[test]
fn golden_reports() {
    golden("sat_l_geq3", &["sat", "--json", "-f", &fixture("fixtures/l_geq3.mso")], 0);
    golden("rigid_neq_guard", &["rigid", "--json", "-f", &fixture("fixtures/neq_guard.mso")], 1);
    golden("compile_l2", &["compile", "--json", "-f", &fixture("fixtures/l2.mso")], 0);
    golden("analyze_l2", &["analyze", "--json", "-p", &core_fixture("l2.rec")], 0);
    golden("fma_check_l_arc_star", &["fma-check", "--json", "--fma", &core_fixture("l_arc_star.fma")], 0);
}

#[test]
fn compile_then_quotient_round_trips() {
    let dir = std::env::temp_dir().join(format!("dml-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("l1.rec");
    let o = dml(&["compile", "-f", &fixture("fixtures/l_geq3.mso"), "-o", out.to_str().unwrap(), "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["orbits"], 4);
    assert_eq!(report["empty"], false);
    let o = dml(&["quotient", "-r", out.to_str().unwrap(), "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let q: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(q["orbits"], 4);
    let o = dml(&["analyze", "-p", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn selftest_filter_and_mutation() {
    let o = dml(&["selftest", "--filter", "green", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let names: Vec<&str> = r["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["structure"]);

    let bad = fixture("tests/data/corrupted_l1.rec");
    let o = dml(&["selftest", "--l1", &bad, "--filter", "l1"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("FAIL 1.") && text.contains("fails validate"), "{text}");
}

#[test]
fn fma_run_prints_the_run() {
    let o = dml(&["fma-run", "--fma", &core_fixture("l_arc.fma"), "-w", "a@1 a@2 a@1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("run: init() -> q(1) -> q(1) -> acc()"));
}
