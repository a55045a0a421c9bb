//! End-to-end tests of the `ergodix` binary: exit codes, human output, the
//! machine format's byte stability, and DOT export.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ergodix"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_file(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

const BUILTIN: &str = r#"{ "kind": "builtin_example" }"#;

const ABSORBING: &str = r#"{
  "kind": "finite_game",
  "n": 2,
  "states": [
    { "min_actions": [ { "name": "a", "max_actions": [
        { "name": "b", "payment": 0.0, "transition": [1.0, 0.0] } ] } ] },
    { "min_actions": [ { "name": "a", "max_actions": [
        { "name": "b", "payment": 0.0, "transition": [0.0, 1.0] } ] } ] }
  ]
}"#;

const BAD_ROW: &str = r#"{
  "kind": "finite_game",
  "n": 1,
  "states": [
    { "min_actions": [ { "name": "a", "max_actions": [
        { "name": "b", "payment": 0.0, "transition": [0.9] } ] } ] }
  ]
}"#;

const CHAIN: &str = r#"{
  "kind": "finite_game",
  "n": 2,
  "states": [
    { "min_actions": [ { "name": "go", "max_actions": [
        { "name": "b", "payment": 3.0, "transition": [0.0, 1.0] } ] } ] },
    { "min_actions": [ { "name": "stay", "max_actions": [
        { "name": "b", "payment": 0.0, "transition": [0.0, 1.0] } ] } ] }
  ]
}"#;

const STAY_OR_GO_MDP: &str = r#"{
  "kind": "finite_game",
  "n": 2,
  "states": [
    { "min_actions": [
        { "name": "stay", "max_actions": [
            { "name": "b", "payment": 0.0, "transition": [1.0, 0.0] } ] },
        { "name": "go", "max_actions": [
            { "name": "b", "payment": 10.0, "transition": [0.0, 1.0] } ] } ] },
    { "min_actions": [ { "name": "loop", "max_actions": [
        { "name": "b", "payment": 0.0, "transition": [0.0, 1.0] } ] } ] }
  ]
}"#;

const RISK: &str = r#"{ "kind": "risk_sensitive", "matrix": [[1, 2], [3, 4]] }"#;

const NON_MONOTONE_EXPR: &str = r#"{ "kind": "expression", "n": 2, "coords": ["x1 - x2", "x2"] }"#;

#[test]
fn validate_accepts_finite_game() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(dir.path(), "game.json", ABSORBING);
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("VALID"));
}

#[test]
fn validate_names_offending_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(dir.path(), "bad.json", BAD_ROW);
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(
        err.contains("state 1") && err.contains("'a/b'") && err.contains("0.9"),
        "{err}"
    );
    // The same file is accepted with explicit renormalization.
    let out = run(&["validate", path.to_str().unwrap(), "--renormalize"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn validate_rejects_non_monotone_expression() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(dir.path(), "expr.json", NON_MONOTONE_EXPR);
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stdout(&out).contains("monotonicity violated"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn certify_builtin_is_ergodic_probed() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(dir.path(), "builtin.json", BUILTIN);
    let out = run(&["certify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(
        stdout(&out).contains("ERGODIC (provenance: probed)"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn certify_absorbing_reports_witness() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(dir.path(), "absorbing.json", ABSORBING);
    let out = run(&["certify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("NON-ERGODIC"), "{text}");
    assert!(text.contains("witness: I = {1}, J = {2}"), "{text}");
}

#[test]
fn certify_mixing_game_is_exact_and_ergodic() {
    let mixing = r#"{
      "kind": "finite_game", "n": 2,
      "states": [
        { "min_actions": [ { "name": "a", "max_actions": [
            { "name": "b", "payment": 1.0, "transition": [0.5, 0.5] } ] } ] },
        { "min_actions": [ { "name": "a", "max_actions": [
            { "name": "b", "payment": 0.0, "transition": [0.5, 0.5] } ] } ] }
      ]
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(dir.path(), "mixing.json", mixing);
    let out = run(&["certify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("ERGODIC (provenance: exact)"), "{text}");
    assert!(text.contains("solvable for every payment vector"), "{text}");
}

#[test]
fn certify_malformed_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(dir.path(), "broken.json", "{ \"kind\": \"finite_game\", ");
    let out = run(&["certify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("schema error"), "{}", stderr(&out));
    let out = run(&["certify", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_builtin_with_drift_gives_unit_rate() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(dir.path(), "builtin.json", BUILTIN);
    let out = run(&["solve", path.to_str().unwrap(), "--g", "0,0,1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("lambda = 1.000000"), "{text}");
    assert!(text.contains("CONVERGED"), "{text}");
}

#[test]
fn solve_risk_sensitive_matches_log_perron_value() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(dir.path(), "risk.json", RISK);
    let out = run(&["solve", path.to_str().unwrap(), "--machine"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    let lambda = v["lambda"].as_f64().unwrap();
    let expected = ((5.0 + 33.0f64.sqrt()) / 2.0).ln();
    assert!((lambda - expected).abs() < 1e-9, "{lambda} vs {expected}");
    assert_eq!(v["converged"], serde_json::Value::Bool(true));
}

#[test]
fn solve_without_eigenpair_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(dir.path(), "absorbing.json", ABSORBING);
    let out = run(&[
        "solve",
        path.to_str().unwrap(),
        "--g",
        "0,1",
        "--max-iter",
        "2000",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("NOT CONVERGED"), "{}", stdout(&out));
}

#[test]
fn solve_prints_policies_for_finite_games() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(dir.path(), "mdp.json", STAY_OR_GO_MDP);
    let out = run(&["solve", path.to_str().unwrap(), "--policies"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(
        stdout(&out).contains("min plays 'stay'"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn meanpayoff_tracks_drift() {
    let dir = tempfile::tempdir().unwrap();
    let builtin = write_file(dir.path(), "builtin.json", BUILTIN);
    let out = run(&[
        "meanpayoff",
        builtin.to_str().unwrap(),
        "--iters",
        "1000",
        "--g",
        "0,0,1",
        "--machine",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    for entry in v["per_state"].as_array().unwrap() {
        let est = entry.as_f64().unwrap();
        assert!((est - 1.0).abs() < 0.05, "{est}");
    }

    let absorbing = write_file(dir.path(), "absorbing.json", ABSORBING);
    let out = run(&[
        "meanpayoff",
        absorbing.to_str().unwrap(),
        "--iters",
        "100",
        "--g",
        "0,1",
        "--machine",
    ]);
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["per_state"], serde_json::json!([0.0, 1.0]));
}

#[test]
fn simulate_deterministic_chain_has_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(dir.path(), "chain.json", CHAIN);
    for seed in ["0", "7", "123456"] {
        let out = run(&[
            "simulate",
            path.to_str().unwrap(),
            "--horizon",
            "3",
            "--trials",
            "16",
            "--seed",
            seed,
            "--machine",
        ]);
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
        let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
        assert_eq!(v["per_state"][0]["mean"].as_f64().unwrap(), 1.0);
        assert_eq!(v["per_state"][0]["std_error"].as_f64().unwrap(), 0.0);
        assert_eq!(v["per_state"][1]["mean"].as_f64().unwrap(), 0.0);
    }
}

#[test]
fn simulate_rejects_non_finite_models() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(dir.path(), "risk.json", RISK);
    let out = run(&["simulate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("finite_game"), "{}", stderr(&out));
}

#[test]
fn machine_output_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let builtin = write_file(dir.path(), "builtin.json", BUILTIN);
    for subcmd in [
        vec!["certify", builtin.to_str().unwrap(), "--machine"],
        vec![
            "solve",
            builtin.to_str().unwrap(),
            "--g",
            "0.25,0,1",
            "--machine",
        ],
        vec!["hypergraphs", builtin.to_str().unwrap(), "--machine"],
        vec![
            "meanpayoff",
            builtin.to_str().unwrap(),
            "--iters",
            "250",
            "--machine",
        ],
    ] {
        let a = run(&subcmd);
        let b = run(&subcmd);
        assert_eq!(a.status.code(), b.status.code());
        assert_eq!(a.stdout, b.stdout, "machine output drifted for {subcmd:?}");
        assert!(!a.stdout.is_empty());
        let parsed: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
        assert!(parsed.is_object());
    }
}

#[test]
fn dot_export_is_deterministic_with_diamond_tails() {
    let dir = tempfile::tempdir().unwrap();
    let builtin = write_file(dir.path(), "builtin.json", BUILTIN);
    let dot_a = dir.path().join("dot_a");
    let dot_b = dir.path().join("dot_b");
    for d in [&dot_a, &dot_b] {
        let out = run(&[
            "certify",
            builtin.to_str().unwrap(),
            "--dot",
            d.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let plus_a = std::fs::read_to_string(dot_a.join("hplus.dot")).unwrap();
    let plus_b = std::fs::read_to_string(dot_b.join("hplus.dot")).unwrap();
    assert_eq!(plus_a, plus_b);
    // The {2,3} -> 1 hyperarc renders through an auxiliary diamond node.
    assert!(plus_a.contains("shape=diamond"), "{plus_a}");
    assert!(
        plus_a.contains("n2 -> a0;")
            && plus_a.contains("n3 -> a0;")
            && plus_a.contains("a0 -> n1;")
    );
    assert!(std::fs::read_to_string(dot_a.join("hminus.dot"))
        .unwrap()
        .contains("n2 -> n1;"));
}

#[test]
fn hypergraphs_lists_reference_arcs() {
    let dir = tempfile::tempdir().unwrap();
    let builtin = write_file(dir.path(), "builtin.json", BUILTIN);
    let out = run(&["hypergraphs", builtin.to_str().unwrap(), "--machine"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["hplus"]["arcs"].as_array().unwrap().len(), 4);
    assert_eq!(v["hminus"]["arcs"].as_array().unwrap().len(), 5);
    assert_eq!(v["hplus"]["provenance"], "probed");
}

#[test]
fn declared_hyperarcs_show_in_provenance() {
    let dir = tempfile::tempdir().unwrap();
    // The reference coordinates written as expressions, with one declared arc.
    let expr = r#"{
      "kind": "expression", "n": 3,
      "coords": ["x1 + h(min(x2, x3) - x1)", "x1 - h(x1 - x3)", "x3"],
      "hyperarcs_plus": [ { "tail": [2, 3], "head": 1 } ]
    }"#;
    let path = write_file(dir.path(), "expr.json", expr);
    let out = run(&["certify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(
        stdout(&out).contains("provenance: hplus=declared, hminus=probed"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn expression_file_g_is_default_and_flag_overrides() {
    let expr = r#"{
      "kind": "expression", "n": 3,
      "coords": ["x1 + h(min(x2, x3) - x1)", "x1 - h(x1 - x3)", "x3"],
      "g": [0.0, 0.0, 1.0]
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(dir.path(), "expr.json", expr);
    let out = run(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(
        stdout(&out).contains("lambda = 1.000000"),
        "{}",
        stdout(&out)
    );

    let out = run(&["solve", path.to_str().unwrap(), "--g", "0,0,-2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(
        stdout(&out).contains("lambda = -2.000000"),
        "{}",
        stdout(&out)
    );

    let out = run(&["solve", path.to_str().unwrap(), "--g", "1,2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
#[cfg_attr(
    not(feature = "parallel"),
    ignore = "thread cap is a parallel-build feature"
)]
fn thread_cap_env_is_honored_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let builtin = write_file(dir.path(), "builtin.json", BUILTIN);
    let out = bin()
        .args(["certify", builtin.to_str().unwrap()])
        .env("ERGODIX_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let out = bin()
        .args(["certify", builtin.to_str().unwrap()])
        .env("ERGODIX_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("ERGODIX_THREADS"), "{}", stderr(&out));
}
