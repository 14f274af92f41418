use std::path::PathBuf;

use privarch::cli::{resolve_budget, run_with};
use privarch::explorer::DEFAULT_BUDGET;
use serde_json::Value;

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

fn fixture(name: &str) -> String {
    format!("{FIXTURES}/{name}")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("privarch-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["privarch"];
    argv.extend_from_slice(args);
    let code = run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut a = args.to_vec();
    a.push("--json");
    let (code, out, err) = run(&a);
    let v = serde_json::from_str(&out).unwrap_or_else(|e| panic!("{e}: {out}{err}"));
    (code, v)
}

fn synthesized(name: &str, extra: &[&str]) -> String {
    let path = scratch(name);
    let p = path.to_str().unwrap().to_string();
    let spec = fixture("coppa.parch");
    let mut args = vec!["synthesize", spec.as_str(), "--algorithm", "2", "-o", p.as_str()];
    args.extend_from_slice(extra);
    let (code, _, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    p
}

#[test]
fn explore_finds_the_breach() {
    let (code, out, _) = run(&["explore", &fixture("coppa.parch"), "--depth", "3"]);
    assert_eq!(code, 1);
    assert!(out.contains("COUNTEREXAMPLE to `Website ni INFO => Website ni CONSENT` (1 event(s))"));
    let (code, v) = json(&["explore", &fixture("coppa.parch"), "--depth", "3"]);
    assert_eq!(code, 1);
    assert_eq!(v["command"], "explore");
    assert_eq!(v["counterexamples"][0]["events"][0]["sender"], "Child");
    assert_eq!(v["exhausted"], true);
}

#[test]
fn synthesize_then_verify() {
    let safe = synthesized("safe.parch", &[]);
    let (code, out, _) = run(&["verify", &safe, "--partition", "canonical"]);
    assert_eq!(code, 0, "{out}");
    let (code, v) = json(&["verify", &safe, "--partition", "canonical"]);
    assert_eq!(code, 0);
    assert_eq!(v["conditions"], "split-interface");
    assert_eq!(v["report"]["passed"], true);

    let (code, out, _) = run(&["check", &safe, &fixture("coppa_witness.trace")]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("pos(Website, INFO): reached"));
}

#[test]
fn synthesize_reports_counts() {
    let (code, v) = json(&["synthesize", &fixture("coppa.parch")]);
    assert_eq!(code, 0);
    assert_eq!(v["agents"], 9);
    assert_eq!(v["types"], 21);
    assert_eq!(v["constructors"], 30);
    assert_eq!(v["channel_types"], 558);
    assert!(v["document"].as_str().unwrap().contains("option algorithm 2;"));

    let (code, v) = json(&["synthesize", &fixture("coppa_create.parch")]);
    assert_eq!(code, 0);
    assert_eq!(v["algorithm"], 1);
    assert_eq!(v["types"], 12);
    assert_eq!(v["constructors"], 25);
}

#[test]
fn single_interface_pipeline() {
    let path = scratch("one.parch");
    let p = path.to_str().unwrap();
    let (code, _, err) = run(&["synthesize", &fixture("coppa_create.parch"), "-o", p]);
    assert_eq!(code, 0, "{err}");
    let (code, v) = json(&["verify", p, "--partition", "canonical"]);
    assert_eq!(code, 0);
    assert_eq!(v["conditions"], "single-interface");
}

#[test]
fn wrong_constraint_form_is_an_input_error() {
    let (code, _, err) = run(&["synthesize", &fixture("coppa.parch"), "--algorithm", "1"]);
    assert_eq!(code, 2);
    assert!(err.contains("does not accept"), "{err}");
}

#[test]
fn relaxed_pipeline_uses_local_constraints() {
    let relaxed = synthesized("relaxed.parch", &["--relax-52", &fixture("coppa.grants")]);
    let text = std::fs::read_to_string(&relaxed).unwrap();
    assert!(text.contains("constraint local I:Parent -> O:Parent : POLICY after Parent;"));
    let (code, v) = json(&["verify", &relaxed, "--partition", "canonical"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["report"]["warnings"].as_array().unwrap().len(), 2);
    let (code, v) = json(&["explore", &relaxed, "--depth", "12"]);
    assert_eq!(code, 0);
    assert_eq!(v["witnesses"][0]["events"].as_array().unwrap().len(), 12);

    let other = synthesized("relaxed2.parch", &["--relax", &fixture("coppa.grants")]);
    assert_eq!(std::fs::read_to_string(other).unwrap(), text);
}

#[test]
fn bad_partition_fails_verification() {
    let safe = synthesized("safe-p.parch", &[]);
    let part = scratch("moved.part");
    std::fs::write(
        &part,
        "cell Child: I:Child, O:Child;\ncell Parent: I:Parent;\ncell Website: I:Website, O:Website, O:Parent;\n",
    )
    .unwrap();
    let (code, v) = json(&["verify", &safe, "--partition", part.to_str().unwrap()]);
    assert_eq!(code, 1);
    let premises: Vec<&str> = v["report"]["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x["premise"].as_str().unwrap())
        .collect();
    assert!(premises.contains(&"T3.2"), "{premises:?}");
}

#[test]
fn invalid_trace_is_localized() {
    let trace = scratch("bad.trace");
    std::fs::write(&trace, "Website -> Parent : policy : POLICY;\nChild -> Parent : info : INFO;\n").unwrap();
    let (code, v) = json(&["check", &fixture("coppa.parch"), trace.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(v["valid"], false);
    assert_eq!(v["invalid"]["index"], 1);
    assert_eq!(v["invalid"]["reason"], "channel violation");
}

#[test]
fn non_compliant_trace() {
    let trace = scratch("breach.trace");
    std::fs::write(&trace, "Child -> Website : info : INFO;\n").unwrap();
    let (code, v) = json(&["check", &fixture("coppa.parch"), trace.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(v["valid"], true);
    assert_eq!(v["compliant"], false);
    assert_eq!(v["violations"][0]["prefix_length"], 1);
    assert_eq!(v["positives"][0]["satisfied"], true);
}

#[test]
fn dot_export() {
    let (code, v) = json(&["dot", &fixture("coppa.parch")]);
    assert_eq!(code, 0);
    assert_eq!((v["nodes"].as_u64(), v["edges"].as_u64()), (Some(3), Some(3)));
    let safe = synthesized("safe-d.parch", &[]);
    let out = scratch("safe.dot");
    let (code, v) = json(&["dot", &safe, "--partition", "canonical", "-o", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["clusters"], 3);
    assert!(std::fs::read_to_string(out).unwrap().starts_with("digraph"));
}

#[test]
fn input_errors_exit_two() {
    assert_eq!(run(&["dot", "missing.parch"]).0, 2);
    let bad = scratch("bad.parch");
    std::fs::write(&bad, "types A;\nagent X holds c A;\n").unwrap();
    let (code, _, err) = run(&["dot", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains(":2:17: expected"), "{err}");
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["synthesize", &fixture("coppa.parch"), "--algorithm", "3"]).0, 2);
    assert_eq!(run(&["explore", &fixture("coppa.parch"), "--depth", "0"]).0, 2);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn budget_precedence() {
    assert_eq!(resolve_budget(Some(5), Some("7")), Ok(5));
    assert_eq!(resolve_budget(None, Some("7")), Ok(7));
    assert_eq!(resolve_budget(None, None), Ok(DEFAULT_BUDGET));
    assert!(resolve_budget(None, Some("lots")).is_err());
    let (code, v) = json(&["explore", &fixture("coppa.parch"), "--depth", "3", "--budget", "0"]);
    assert_eq!(code, 0);
    assert_eq!(v["exhausted"], false);
    assert_eq!(v["budget"], 0);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_privarch");
    let status = |args: &[&str]| std::process::Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(status(&["--version"]), Some(0));
    assert_eq!(status(&["dot", "missing.parch"]), Some(2));
    assert_eq!(status(&["explore", &fixture("coppa.parch"), "--depth", "3"]), Some(1));
}
