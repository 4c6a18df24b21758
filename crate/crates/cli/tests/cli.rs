use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hopflab(cmd: &str, config: &str, dir: &Path, extra: &[&str]) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_hopflab"))
        .arg(cmd)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let body = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, body)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn interval_torsion_function() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"domain": "interval", "resolution": "1000", "potential": {"kind": "zero"},
                  "source": "one", "ladder": {"k0": "10", "ratio": "4", "steps": "3"}}"#;
    let out = hopflab("solve", cfg, dir.path(), &[]);
    ok(&out);
    let (header, body) = rows(&dir.path().join("out/solution.csv"));
    let (x, u) = (column(&header, "x"), column(&header, "u"));
    for row in &body {
        let x: f64 = row[x].parse().unwrap();
        let u: f64 = row[u].parse().unwrap();
        assert!((u - x * (1.0 - x) / 2.0).abs() < 1e-7, "u({x}) = {u}");
    }
    let diag = read_json(&dir.path().join("out/diagnostics.json"));
    assert_eq!(diag["command"], "solve");
    assert!(diag["config"].is_object());
}

#[test]
fn csv_carries_metadata_and_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"domain": "interval", "resolution": "100", "potential": {"kind": "zero"}, "source": "one"}"#;
    ok(&hopflab("solve", cfg, dir.path(), &[]));
    let text = fs::read_to_string(dir.path().join("out/solution.csv")).unwrap();
    let meta: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
    assert_eq!(meta[0], concat!("# hopflab ", env!("CARGO_PKG_VERSION")));
    assert_eq!(meta[1], "# command: solve");
    let (_, body) = rows(&dir.path().join("out/solution.csv"));
    let mantissa = body[1][0].split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 17, "{}", body[1][0]);
}

#[test]
fn disk_center_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"domain": "disk", "resolution": "64", "potential": {"kind": "zero"}, "source": "one"}"#;
    ok(&hopflab("solve", cfg, dir.path(), &[]));
    let diag = read_json(&dir.path().join("out/diagnostics.json"));
    let center = diag["result"]["u_center"].as_f64().unwrap();
    assert!((center - 0.25).abs() < 1e-3, "u(0) = {center}");
}

#[test]
fn missing_potential_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = hopflab("solve", r#"{"domain": "interval", "resolution": "100", "source": "one"}"#, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("potential"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"domain": "interval", "resolution": "100", "potential": {"kind": "zero"},
                  "source": "one", "colour": "blue"}"#;
    assert_eq!(hopflab("solve", cfg, dir.path(), &[]).status.code(), Some(2));
}

#[test]
fn empty_alpha_list_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"domain": "interval", "resolution": "100", "source": "one", "scan": {"alpha": []}}"#;
    assert_eq!(hopflab("hopf-scan", cfg, dir.path(), &[]).status.code(), Some(2));
}

#[test]
fn negative_mass_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"domain": "interval", "resolution": "100", "potential": {"kind": "zero"},
                  "measure": {"atoms": [{"at": "0", "mass": "-1"}]}}"#;
    assert_eq!(hopflab("measure-bvp", cfg, dir.path(), &[]).status.code(), Some(2));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_hopflab"))
        .args(["solve", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn free_measure_problem_has_no_defect() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"domain": "interval", "resolution": "2000", "potential": {"kind": "zero"},
                  "ladder": {"k0": "10", "ratio": "4", "steps": "3"},
                  "measure": {"atoms": [{"at": "0", "mass": "1"}, {"at": "1", "mass": "1"}]}}"#;
    ok(&hopflab("measure-bvp", cfg, dir.path(), &[]));
    let defect = read_json(&dir.path().join("out/defect.json"));
    let mass = defect["result"]["defect_mass"].as_f64().unwrap();
    assert!(mass.abs() <= 1e-6, "defect mass {mass}");
    assert_eq!(defect["result"]["has_solution"], true);
    let (header, body) = rows(&dir.path().join("out/solution.csv"));
    let u = column(&header, "u");
    for row in &body {
        let u: f64 = row[u].parse().unwrap();
        assert!((u - 1.0).abs() < 1e-6, "harmonic extension {u}");
    }
}

#[test]
fn oracle_compare_rejects_what_it_cannot_check() {
    let dir = tempfile::tempdir().unwrap();
    let measure = r#"{"domain": "interval", "resolution": "100", "potential": {"kind": "zero"},
                      "source": "one", "measure": {"atoms": [{"at": "0", "mass": "1"}]}}"#;
    assert_eq!(hopflab("oracle-compare", measure, dir.path(), &[]).status.code(), Some(2));
    let skew = r#"{"domain": "disk", "resolution": "32", "potential": {"kind": "zero"}, "source": "x"}"#;
    assert_eq!(hopflab("oracle-compare", skew, dir.path(), &[]).status.code(), Some(2));
}

#[test]
fn oracle_compare_free_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"domain": "interval", "resolution": "2000", "potential": {"kind": "zero"},
                  "source": "one", "ladder": {"k0": "10", "ratio": "4", "steps": "3"}}"#;
    ok(&hopflab("oracle-compare", cfg, dir.path(), &[]));
    let (header, body) = rows(&dir.path().join("out/oracle_compare.csv"));
    let err = column(&header, "abs_err");
    assert!(!body.is_empty());
    for row in &body {
        let e: f64 = row[err].parse().unwrap();
        assert!(e <= 1e-6, "{row:?}");
    }
}

#[test]
fn sigma_verdicts_for_a_critical_potential() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"domain": "interval", "resolution": "20000",
                  "potential": {"kind": "sided",
                                "left": {"kind": "powerlaw", "C": "4", "alpha": "2"},
                                "right": {"kind": "constant", "c": "1"}},
                  "ladder": {"k0": "10", "ratio": "4", "steps": "10"}}"#;
    ok(&hopflab("sigma", cfg, dir.path(), &[]));
    let (header, body) = rows(&dir.path().join("out/sigma.csv"));
    let verdict = column(&header, "verdict");
    assert_eq!(body.len(), 2);
    assert_eq!(body[0][verdict], "in_Sigma");
    assert_eq!(body[1][verdict], "not_in_Sigma");
}

#[test]
fn seeded_perturbations_are_reproducible() {
    let cfg = r#"{"domain": "interval", "resolution": "400", "potential": {"kind": "powerlaw", "C": "1", "alpha": "1.5"},
                  "source": "one", "ladder": {"k0": "10", "ratio": "4", "steps": "3"}, "perturbations": "3"}"#;
    let run = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        ok(&hopflab("solve", cfg, dir.path(), &["--seed", seed]));
        read_json(&dir.path().join("out/diagnostics.json"))["result"]["perturbations"].clone()
    };
    let first = run("11");
    assert_eq!(first["seed"], 11);
    assert_eq!(first["count"], 3);
    assert_eq!(first["max_violation"].as_f64(), Some(0.0));
    assert_eq!(first, run("11"));
    assert_eq!(run("12")["seed"], 12);
}
