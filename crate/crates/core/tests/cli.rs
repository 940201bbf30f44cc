use std::path::PathBuf;
use std::process::Command;

use logiguide::cli::{run, RunError};

fn model(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("examples/models")
        .join(name)
        .display()
        .to_string()
}

fn run_ok(args: &[&str]) -> String {
    let mut out = Vec::new();
    let mut argv = vec!["logiguide"];
    argv.extend_from_slice(args);
    if let Err(e) = run(argv, &mut out) {
        panic!("{args:?} failed: {e:?}");
    }
    String::from_utf8(out).unwrap()
}

#[test]
fn compile_reports_equivalence() {
    let out = run_ok(&[
        "compile",
        "--model",
        &model("digits.json"),
        "--query",
        "(digit.1 & blue) | (digit.9 & red)",
    ]);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "(orME (andCI digit.1 color.blue) (andCI digit.9 color.red))"
    );
    assert!(out.contains("valid: true"));
    assert!(out.contains("equivalent: true"));
}

#[test]
fn compile_accepts_a_circuit_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.sexp");
    std::fs::write(&path, "(orME (andCI digit.1 color.red) (andCI digit.1 color.red))\n").unwrap();
    let out = run_ok(&[
        "compile",
        "--model",
        &model("digits.json"),
        "--circuit",
        path.to_str().unwrap(),
    ]);
    assert!(out.contains("valid: false"), "{out}");
}

#[test]
fn eval_writes_scores_and_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let points = dir.path().join("points.json");
    std::fs::write(&points, r#"[{"t": 0.5, "x": [0.1, -0.2, 0.3, 0.0]}]"#).unwrap();
    let out = run_ok(&[
        "eval",
        "--model",
        &model("shapes.json"),
        "--query",
        "shape.a | red",
        "--points",
        points.to_str().unwrap(),
        "--exact-mode",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    let r = &doc["results"][0];
    let p = r["posterior"].as_f64().unwrap();
    assert!(p > 0.0 && p < 1.0);
    assert_eq!(r["score"].as_array().unwrap().len(), 4);
    assert!(r["coefficients"]["shape.a"].is_number());
}

#[test]
fn verify_campaign_passes() {
    let out = run_ok(&[
        "verify",
        "--model",
        &model("digits.json"),
        "--n-formulas",
        "20",
        "--seed",
        "7",
        "--probes",
        "5",
    ]);
    assert!(out.contains("formulas: 20"));
    assert!(out.contains("equivalence failures: 0"));
    let taxonomy = run_ok(&[
        "verify",
        "--model",
        &model("animals.json"),
        "--n-formulas",
        "20",
        "--seed",
        "7",
    ]);
    assert!(taxonomy.contains("structural violations: 0"));
}

#[test]
fn sample_writes_csv_and_reproducible_manifest() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        run_ok(&[
            "sample",
            "--model",
            &model("shapes.json"),
            "--query",
            "shape.b",
            "--n",
            "50",
            "--steps",
            "100",
            "--seed",
            "3",
            "--out-dir",
            dir.path().to_str().unwrap(),
        ]);
    }
    let csv = std::fs::read_to_string(a.path().join("samples.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x0,x1,x2,x3,shape,color,satisfies");
    assert_eq!(csv.lines().count(), 51);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert!(manifest["config_hash"].as_str().unwrap().len() == 64);
    assert_eq!(
        std::fs::read(a.path().join("samples.csv")).unwrap(),
        std::fs::read(b.path().join("samples.csv")).unwrap()
    );
}

#[test]
fn report_writes_the_weight_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(&[
        "report",
        "--model",
        &model("shapes.json"),
        "--query",
        "shape.a | shape.b",
        "--weights",
        "0,1",
        "--n",
        "40",
        "--steps",
        "100",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.contains("conformity"));
    let csv = std::fs::read_to_string(dir.path().join("conformity_vs_w.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn failures_are_typed() {
    let mut out = Vec::new();
    let err = run(
        [
            "logiguide",
            "compile",
            "--model",
            &model("digits.json"),
            "--query",
            "digit.1 &",
        ],
        &mut out,
    )
    .unwrap_err();
    assert!(matches!(err, RunError::Failed(logiguide::Error::Syntax { .. })));
    assert!(matches!(
        run(["logiguide", "frobnicate"], &mut out),
        Err(RunError::Usage(_))
    ));
}

#[test]
fn binary_prints_one_error_line() {
    let out = Command::new(env!("CARGO_BIN_EXE_logiguide"))
        .args([
            "compile",
            "--model",
            &model("digits.json"),
            "--query",
            "digit.1 & purple",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with("error kind=unknown_atom message="), "{stderr}");
}
