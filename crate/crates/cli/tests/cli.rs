use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn kkt2(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kkt2"))
        .args(args)
        .env_remove("KKT2_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&o.stdout)
        )
    })
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn check<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no check {name}"))
}

/// min (x0 - 1)^2 + x1^2 subject to x0 <= 0: optimum at the origin with mu = 2.
const BOUND_QP: &str = r#"{
  "n": 2,
  "objective": {"constant": 1.0, "linear": [-2.0, 0.0], "hessian": [[0, 0, 2.0], [1, 1, 2.0]]},
  "constraints": [{"linear": [1.0, 0.0]}]
}"#;

#[test]
fn example2_reports_snc_violation_with_limit_direction() {
    let o = kkt2(&["repro", "example2", "--trunc", "8", "--format", "json"]);
    assert_eq!(code(&o), 1);
    let r = json(&o);
    assert_eq!(r["schema"], 1);
    let snc = check(&r, "snc");
    assert_eq!(snc["outcome"], "violated");
    let h: Vec<f64> = serde_json::from_value(snc["witness"]["verdict"]["witness"].clone()).unwrap();
    let expected = [0.0, 1.0, 0.0];
    for (a, b) in h.iter().zip(expected) {
        assert!((a - b).abs() < 1e-6, "{h:?}");
    }
}

#[test]
fn reports_are_deterministic_up_to_wall_time() {
    let run = || {
        let mut r = json(&kkt2(&[
            "--seed", "7", "repro", "example2", "--trunc", "5", "--format", "json",
        ]));
        r["wall_time_ms"] = Value::Null;
        serde_json::to_string_pretty(&r).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn seed_flag_beats_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_kkt2"))
        .args([
            "--seed", "11", "repro", "example2", "--trunc", "3", "--format", "json",
        ])
        .env("KKT2_SEED", "5")
        .output()
        .unwrap();
    assert_eq!(json(&o)["seed"], 11);
    let o = Command::new(env!("CARGO_BIN_EXE_kkt2"))
        .args(["repro", "example2", "--trunc", "3", "--format", "json"])
        .env("KKT2_SEED", "5")
        .output()
        .unwrap();
    assert_eq!(json(&o)["seed"], 5);
}

#[test]
fn stationary_point_passes_foc_and_lists_multiplier() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "p.json", BOUND_QP);
    let at = write(&dir, "x.json", r#"{"x": [0.0, 0.0]}"#);
    let o = kkt2(&["check-foc", &f, "--at", &at, "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = json(&o);
    assert_eq!(r["checks"][0]["name"], "feasibility");

    let o = kkt2(&["multipliers", &f, "--at", &at, "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v = check(&json(&o), "multiplier_set")["numbers"]["vertices"].clone();
    assert!((v[0][0].as_f64().unwrap() - 2.0).abs() < 1e-9, "{v}");
}

#[test]
fn non_stationary_point_fails_foc_with_residual() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "p.json", BOUND_QP);
    let at = write(&dir, "x.json", r#"{"x": [-1.0, 0.0]}"#);
    let o = kkt2(&["check-foc", &f, "--at", &at, "--format", "json"]);
    assert_eq!(code(&o), 1);
    let foc = check(&json(&o), "foc").clone();
    assert_eq!(foc["witness"]["kind"], "residual");
    assert!(foc["numbers"]["residual"].as_f64().unwrap() > 1.0);
}

#[test]
fn infeasible_point_stops_after_feasibility() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "p.json", BOUND_QP);
    let at = write(&dir, "x.json", r#"{"x": [1.0, 0.0]}"#);
    let o = kkt2(&["check-snc", &f, "--at", &at, "--format", "json"]);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&o)["checks"].as_array().unwrap().len(), 1);
}

#[test]
fn second_order_and_growth_on_convex_problem() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "p.json", BOUND_QP);
    let at = write(&dir, "x.json", r#"{"x": [0.0, 0.0]}"#);
    for args in [
        vec!["check-snc"],
        vec!["check-ssc", "--eta", "0.1", "--alpha", "1.0"],
        vec![
            "growth",
            "--alpha",
            "1.0",
            "--eps",
            "0.1",
            "--samples",
            "500",
        ],
        vec!["check-cq"],
        vec!["validate-derivatives"],
    ] {
        let mut a = args.clone();
        a.extend([f.as_str(), "--at", at.as_str()]);
        let o = kkt2(&a);
        assert_eq!(
            code(&o),
            0,
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stdout)
        );
    }
}

#[test]
fn strict_cq_uses_point_file_multiplier() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "p.json", BOUND_QP);
    let at = write(&dir, "x.json", r#"{"x": [0.0, 0.0], "mu": [2.0]}"#);
    let o = kkt2(&["check-cq", "--strict", &f, "--at", &at, "--format", "json"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["checks"].as_array().unwrap().len(), 2);
    assert_eq!(check(&r, "strict_cq")["numbers"]["mu"][0], 2.0);

    let bad = write(&dir, "y.json", r#"{"x": [0.0, 0.0], "mu": [1.0]}"#);
    let o = kkt2(&["check-cq", "--strict", &f, "--at", &bad, "--format", "json"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn growth_counterexample_on_saddle() {
    let dir = TempDir::new().unwrap();
    let f = write(
        &dir,
        "p.json",
        r#"{"n": 2, "objective": {"hessian": [[0, 0, 1.0], [1, 1, -1.0]]}}"#,
    );
    let at = write(&dir, "x.json", r#"{"x": [0.0, 0.0]}"#);
    let o = kkt2(&[
        "growth", &f, "--at", &at, "--alpha", "0", "--eps", "0.1", "--format", "json",
    ]);
    assert_eq!(code(&o), 1);
    assert_eq!(check(&json(&o), "growth")["witness"]["kind"], "point");
}

#[test]
fn parse_and_usage_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let broken = write(
        &dir,
        "p.json",
        "{\"n\": 1,\n \"objective\": {\"hesian\": []}}",
    );
    let o = kkt2(&["check-foc", &broken, "--at", &broken]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2"), "{err}");

    let asym = write(
        &dir,
        "q.json",
        r#"{"n": 2, "objective": {"hessian": [[0, 1, 1.0], [1, 0, 2.0]]}}"#,
    );
    assert_eq!(code(&kkt2(&["check-foc", &asym, "--at", &asym])), 2);

    let f = write(&dir, "ok.json", BOUND_QP);
    assert_eq!(code(&kkt2(&["check-foc", &f])), 2);
    let short = write(&dir, "x.json", r#"{"x": [0.0]}"#);
    assert_eq!(code(&kkt2(&["check-foc", &f, "--at", &short])), 2);
    assert_eq!(code(&kkt2(&["check-foc", "/nonexistent/p.json"])), 2);
    assert_eq!(
        code(&kkt2(&["check-ssc", &f, "--eta", "-1", "--alpha", "1"])),
        2
    );
    assert_eq!(code(&kkt2(&["repro", "example1", "--grid", "13"])), 2);
    assert_eq!(code(&kkt2(&["--format", "yaml", "repro", "example2"])), 2);
}

#[test]
fn builtin_files_default_to_base_point() {
    let dir = TempDir::new().unwrap();
    let f = write(
        &dir,
        "p.json",
        r#"{"builtin": {"name": "example2", "size": 6}}"#,
    );
    let o = kkt2(&["check-snc", &f, "--format", "json"]);
    assert_eq!(code(&o), 1);
    let o = kkt2(&["validate-derivatives", &f]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn replay_reverifies_recorded_witnesses() {
    let dir = TempDir::new().unwrap();
    let o = kkt2(&["repro", "example2", "--trunc", "6", "--format", "json"]);
    let report = write(&dir, "r.json", std::str::from_utf8(&o.stdout).unwrap());
    let f = write(
        &dir,
        "p.json",
        r#"{"builtin": {"name": "example2", "size": 6}}"#,
    );
    let o = kkt2(&["replay", &report, &f, "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = json(&o);
    assert_eq!(check(&r, "digest")["outcome"], "holds");
    assert_eq!(check(&r, "replay:snc")["outcome"], "holds");
    assert_eq!(
        check(&r, "replay:growth_positive_alpha")["outcome"],
        "holds"
    );

    let other = write(
        &dir,
        "q.json",
        r#"{"builtin": {"name": "example2", "size": 7}}"#,
    );
    let o = kkt2(&["replay", &report, &other, "--format", "json"]);
    assert_eq!(check(&json(&o), "digest")["outcome"], "violated");

    assert!(Path::new(&report).exists());
    let garbage = write(&dir, "g.json", r#"{"schema": 2}"#);
    assert_eq!(code(&kkt2(&["replay", &garbage, &f])), 2);
}

#[test]
fn text_output_ends_with_result_line() {
    let o = kkt2(&["repro", "example2", "--trunc", "4"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().last().unwrap().starts_with("result"), "{text}");
    assert!(text.contains("snc"));
}
