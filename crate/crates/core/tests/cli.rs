use std::path::Path;
use std::process::Command;

fn run(scenario: &str, out: &Path, args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_euopt"))
        .arg("--scenario")
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .args(args)
        .status()
        .unwrap()
        .code()
        .unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

const TWO_PIECE: &str = r#"{
  "state": {"distribution": "uniform", "lo": 1, "hi": 2},
  "kernel": {"form": "identity"},
  "utility": {"family": "two-piece"},
  "problem": {"x0": X0}
}"#;

#[test]
fn solve_writes_report_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "s.json", &TWO_PIECE.replace("X0", "0.3888888888888889"));
    assert_eq!(run(&sc, dir.path(), &["solve"]), 0);
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(rep["classification"], "unique");
    assert!((rep["lambda_star"].as_f64().unwrap() - 1.5).abs() < 1e-9);
    let curve = std::fs::read_to_string(dir.path().join("solution_curve.csv")).unwrap();
    assert!(curve.starts_with("xi,x_star"));
}

#[test]
fn infeasible_budget_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "s.json", &TWO_PIECE.replace("X0", "-1"));
    assert_eq!(run(&sc, dir.path(), &["solve"]), 2);
}

#[test]
fn malformed_scenario_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "s.json", r#"{"state": {"distribution": "standard-normal"}}"#);
    assert_eq!(run(&sc, dir.path(), &["solve"]), 1);
}

#[test]
fn g_curve_marks_infinite_values() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "s.json", &TWO_PIECE.replace("X0", "1"));
    assert_eq!(run(&sc, dir.path(), &["g-curve", "--lambda-min", "0.5", "--lambda-max", "2", "--points", "4"]), 0);
    let csv = std::fs::read_to_string(dir.path().join("g_curve.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "lambda,g");
    assert_eq!(rows.len(), 5);
    assert!(rows[1].ends_with("inf"), "{}", rows[1]);
    assert!(rows[4].starts_with("2,0"), "{}", rows[4]);
}
