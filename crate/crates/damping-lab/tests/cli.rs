use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const ORACLE: &str = r#"
name = "oracle"

[target.oracle]
xi = [0.25, 2.0]
t_max = 10.0
t_count = 101
tolerance = 1e-8
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_damping-lab"));
    c.env("DAMPING_LAB_THREADS", "1");
    c
}

fn run(config: &Path, out: &Path) -> Output {
    bin().arg("run").arg(config).arg("--out").arg(out).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &ORACLE.replace("tolerance = 1e-8", "tolerance = \"tight\""));
    let out = run(&cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ConfigInvalid") && err.contains("target.oracle.tolerance"), "{err}");
}

#[test]
fn unknown_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &ORACLE.replace("t_max", "tmax"));
    let out = run(&cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ConfigInvalid"));
}

#[test]
fn identical_config_gives_identical_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "oracle.toml", ORACLE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&cfg, &a).status.success());
    assert!(run(&cfg, &b).status.success());
    for file in ["report.json", "oracle.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn seeded_scenarios_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
name = "exponents"
seed = 11

[target.exponents]
samples = 50
n_max = 4
table_n_max = 3
table_p = [2.0, 3.0]
"#;
    let cfg = write(dir.path(), "exp.toml", text);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    // The three-way identity check fails by design; the artifacts are still written.
    assert_eq!(run(&cfg, &a).status.code(), Some(1));
    assert_eq!(run(&cfg, &b).status.code(), Some(1));
    assert_eq!(fs::read(a.join("identity.csv")).unwrap(), fs::read(b.join("identity.csv")).unwrap());
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
}

#[test]
fn csv_values_carry_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "oracle.toml", ORACLE);
    let out = dir.path().join("out");
    assert!(run(&cfg, &out).status.success());
    let mut rdr = csv::Reader::from_path(out.join("oracle.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers[0], "xi");
    let row = rdr.records().nth(7).unwrap().unwrap();
    let phi = &row[2];
    let mantissa: String = phi.split(['e', 'E']).next().unwrap().chars().filter(|c| c.is_ascii_digit()).collect();
    assert_eq!(mantissa.trim_start_matches('0').len(), 17, "{phi}");
}

#[test]
fn json_config_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"name": "oracle", "target": {"oracle": {"xi": [0.5], "t_max": 5.0, "t_count": 11, "tolerance": 1e-8}}}"#;
    let cfg = write(dir.path(), "oracle.json", text);
    let out = dir.path().join("out");
    assert!(run(&cfg, &out).status.success());
    let report: Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], Value::Bool(true));
}

#[test]
fn empty_suite_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "suite.toml", "name = \"empty\"\n");
    let out = bin().arg("suite").arg(&cfg).arg("--out").arg(dir.path().join("out")).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn failing_scenario_fails_the_suite() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "oracle.toml", ORACLE);
    let suite = r#"
name = "mixed"
include = ["oracle.toml"]

[[scenario]]
name = "identity"

[scenario.target.exponents]
samples = 20
n_max = 3
table_n_max = 2
table_p = [2.0]
"#;
    let cfg = write(dir.path(), "suite.toml", suite);
    let out = bin().arg("suite").arg(&cfg).arg("--out").arg(dir.path().join("out")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let table = String::from_utf8_lossy(&out.stdout);
    let row = |name: &str| table.lines().find(|l| l.starts_with(name)).unwrap_or_default().to_string();
    assert!(row("oracle").contains("pass"), "{table}");
    assert!(row("identity").contains("FAIL"), "{table}");
}

#[test]
fn schema_and_catalog_are_json() {
    let out = bin().arg("print-schema").output().unwrap();
    assert!(out.status.success());
    let schema: Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["scenario", "suite", "csv"] {
        assert!(schema.get(key).is_some(), "{key}");
    }
    assert!(schema["csv"]["oracle"].is_object() || schema["csv"]["oracle"].is_array());

    let out = bin().arg("list-catalog").output().unwrap();
    assert!(out.status.success());
    let catalog: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!catalog.as_array().map_or(true, |a| a.is_empty()), "{catalog}");
}

#[test]
fn zero_threads_is_an_error() {
    let out = bin().env("DAMPING_LAB_THREADS", "0").arg("list-catalog").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
