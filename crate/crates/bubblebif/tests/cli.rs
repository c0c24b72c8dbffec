use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bubblebif::formats::{read_branch_csv, BRANCH_CSV_HEADER};
use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bubblebif")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(file: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(file).unwrap()).unwrap()
}

#[test]
fn spectrum_table_n3() {
    let o = bin(&["spectrum", "--dim", "3", "--nmax", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,lambda,multiplicity,checksum,max_ode_residual");
    let rows: Vec<Vec<f64>> =
        lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    for (row, (lambda, mult)) in rows.iter().zip([(0.2, 1.0), (1.0, 4.0), (7.0 / 3.0, 9.0)]) {
        assert!((row[1] - lambda).abs() < 1e-15);
        assert_eq!(row[2], mult);
        assert!(row[4] < 1e-9);
    }
}

#[test]
fn bifurcations_k2_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = bin(&["bifurcations", "--path", "k2", "--dim", "4", "--nmax", "3", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&dir.path().join("bifurcations.json"));
    let certified: Vec<f64> = v["candidates"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["simple"] == true && c["invertible"] == true && c["trivial"] == false)
        .map(|c| c["alpha_bar"].as_f64().unwrap())
        .collect();
    assert_eq!(certified.len(), 2);
    assert!((certified[0] - 1.5).abs() < 1e-12);
    assert!((certified[1] - 13.0 / 6.0).abs() < 1e-12);
}

#[test]
fn bifurcations_without_crossings_exit_2() {
    let o = bin(&["bifurcations", "--path", "k2", "--dim", "4", "--alpha-range", "0.7:0.9"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["candidates"].as_array().unwrap().is_empty());
}

#[test]
fn malformed_path_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.json");
    fs::write(&file, "{\"k\": 2, \"A0\": [[0, 1], [1, 0]],").unwrap();
    let o = bin(&["bifurcations", "--path", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("malformed matrix-path JSON"), "{}", stderr(&o));
}

#[test]
fn path_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("k2.json");
    fs::write(&file, r#"{"k": 2, "A0": [[0, 1], [1, 0]], "A1": [[1, -1], [-1, 1]], "alpha_range": [0, 3]}"#).unwrap();
    let o = bin(&["bifurcations", "--path", file.to_str().unwrap(), "--dim", "4", "--nmax", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["candidates"].as_array().unwrap().iter().any(|c| c["n"] == 2 && (c["alpha_bar"].as_f64().unwrap() - 1.5).abs() < 1e-12));
}

#[test]
fn branch_k2_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = bin(&[
        "branch", "--path", "k2", "--dim", "4", "--alpha-bar", "1.5", "--eps-max", "0.1", "--steps", "10", "--out", out,
        "--coefficients",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("branch.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), BRANCH_CSV_HEADER);
    let rows = read_branch_csv(&csv).unwrap();
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r.newton_residual < 1e-12 && r.l.abs() < 1e-8));
    let summary = json(&dir.path().join("branch_summary.json"));
    assert!(summary["direction_derivative"].as_f64().unwrap().abs() < 1e-10);
    assert_eq!(summary["transcritical"], false);
    assert!(summary["max_abs_l"].as_f64().unwrap() < 1e-8);
    assert!(summary["positivity_margin"].as_f64().unwrap() > 0.0);
    let coeffs = json(&dir.path().join("branch_coefficients.json"));
    assert_eq!(coeffs["points"].as_array().unwrap().len(), 21);
    assert_eq!(coeffs["points"][0]["coeffs"].as_array().unwrap().len(), 2);
}

#[test]
fn branch_k3_is_transcritical() {
    let o = bin(&["branch", "--path", "k3", "--dim", "4", "--nmax", "2", "--eps-max", "0.02", "--steps", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(summary["transcritical"], true);
    let d = summary["direction_derivative"].as_f64().unwrap();
    let fd = summary["finite_difference_slope"].as_f64().unwrap();
    assert!((d - fd).abs() < 1e-4 * d.abs());
    assert_eq!(read_branch_csv(&stdout(&o)).unwrap().len(), 9);
}

#[test]
fn trivial_candidate_is_refused() {
    let o = bin(&["branch", "--path", "k2", "--dim", "4", "--level", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("n=1 <= 1"), "{}", stderr(&o));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"dim": 3, "n_max": 2}"#).unwrap();
    let from_file = bin(&["spectrum", "--config", cfg.to_str().unwrap()]);
    assert_eq!(from_file.status.code(), Some(0));
    assert!(stdout(&from_file).lines().nth(1).unwrap().starts_with("0,0.2,"));
    let overridden = bin(&["spectrum", "--config", cfg.to_str().unwrap(), "--dim", "4"]);
    let text = stdout(&overridden);
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().nth(2).unwrap().starts_with("1,1.0,5,"));
}

#[test]
fn invalid_config_exits_1() {
    let o = bin(&["spectrum", "--dim", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dimension"));
    let o = bin(&["spectrum", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_default_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["verify", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&dir.path().join("verify.json"));
    assert_eq!(v["failed"], 0);
    assert_eq!(v["skipped"], 0);
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["status"] == "pass"));
}

#[test]
fn verify_detects_injected_lambda_error() {
    let o = bin(&["verify", "--perturb-lambda", "1e-6"]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let check = v["checks"].as_array().unwrap().iter().find(|c| c["name"] == "spectrum.ode_residual").unwrap().clone();
    assert_eq!(check["status"], "fail");
}

#[test]
fn verify_singular_path_skips_pohozaev() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("singular.json");
    fs::write(&file, r#"{"k": 2, "A0": [[0.5, 0.5], [0.5, 0.5]], "A1": [[0, 0], [0, 0]], "alpha_range": [0, 1]}"#).unwrap();
    let o = bin(&["verify", "--path", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let checks = v["checks"].as_array().unwrap();
    for name in ["pohozaev.inverse_sum_path", "pohozaev.branch"] {
        let c = checks.iter().find(|c| c["name"] == name).unwrap();
        assert_eq!(c["status"], "skip", "{name}: {c}");
    }
    assert!(checks.iter().find(|c| c["name"] == "pohozaev.inverse_sum_path").unwrap()["detail"]
        .as_str()
        .unwrap()
        .contains("singular"));
}

#[test]
fn output_is_deterministic() {
    let a = bin(&["bifurcations", "--path", "k3", "--nmax", "3"]);
    let b = bin(&["bifurcations", "--path", "k3", "--nmax", "3"]);
    assert_eq!(a.stdout, b.stdout);
    let a = bin(&["verify"]);
    let b = bin(&["verify"]);
    assert_eq!(a.stdout, b.stdout);
}
