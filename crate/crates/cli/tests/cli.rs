use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn hamsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hamsim")).args(args).output().expect("binary runs")
}

fn doc(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs").join(name).to_string_lossy().into_owned()
}

fn out_dir(tmp: &TempDir, name: &str) -> PathBuf {
    tmp.path().join(name)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Header and data rows of a report, keyed by column name.
fn read_report(path: &Path) -> Vec<(String, String)> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    header.iter().zip(row).map(|(h, v)| (h.to_string(), v.to_string())).collect()
}

fn field<'a>(report: &'a [(String, String)], key: &str) -> &'a str {
    &report.iter().find(|(k, _)| k == key).unwrap().1
}

#[test]
fn simulate_a1_meets_tolerance() {
    let tmp = TempDir::new().unwrap();
    let out = out_dir(&tmp, "a1");
    let o = hamsim(&[
        "simulate",
        "--approach",
        "a1",
        "--t",
        "1",
        "--delta",
        "1e-6",
        "--out",
        out.to_str().unwrap(),
        &doc("tfim3.ham"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(text.starts_with("# generated_unix="));
    let header = text.lines().nth(1).unwrap();
    assert!(header.starts_with("approach,K,M,d,|R|,t,delta,declared_err,measured_err,wall_ms,prep_unitary_queries"));
    let r = read_report(&out.join("report.csv"));
    assert_eq!(field(&r, "K"), "5");
    assert_eq!(field(&r, "|R|"), "2");
    let measured: f64 = field(&r, "measured_err").parse().unwrap();
    let declared: f64 = field(&r, "declared_err").parse().unwrap();
    assert!(measured <= 1e-5 && measured <= declared);
    assert!(out.join("summary.txt").exists());
}

#[test]
fn simulate_a2_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let body = |name: &str| {
        let out = out_dir(&tmp, name);
        let o = hamsim(&[
            "simulate",
            "--approach",
            "a2",
            "--samples",
            "4096",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
            &doc("tfim3.ham"),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let mut r = read_report(&out.join("report.csv"));
        r.retain(|(k, _)| k != "wall_ms");
        r
    };
    assert_eq!(body("first"), body("second"));
}

#[test]
fn oracle_off_leaves_measured_empty() {
    let tmp = TempDir::new().unwrap();
    let out = out_dir(&tmp, "off");
    let o = hamsim(&["simulate", "--oracle", "off", "--out", out.to_str().unwrap(), &doc("tfim3.ham")]);
    assert!(o.status.success());
    assert_eq!(field(&read_report(&out.join("report.csv")), "measured_err"), "");
}

#[test]
fn time_dependent_pair_runs() {
    let tmp = TempDir::new().unwrap();
    let out = out_dir(&tmp, "td");
    let t = std::f64::consts::FRAC_PI_2.to_string();
    let o = hamsim(&["simulate", "--approach", "td", "--t", &t, "--out", out.to_str().unwrap(), &doc("zpair_td.ham")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let measured: f64 = field(&read_report(&out.join("report.csv")), "measured_err").parse().unwrap();
    assert!(measured <= 1e-5);
}

#[test]
fn missing_coefficients_exit_two() {
    let tmp = TempDir::new().unwrap();
    let o = hamsim(&["simulate", "--approach", "td", "--out", tmp.path().to_str().unwrap(), &doc("tfim3.ham")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("CoefficientsMissing"));
}

#[test]
fn amplification_overflow_exit_three() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("big.ham");
    fs::write(&input, "dims 2 1 2\nterm 1: [0.5 0 ; 0 -0.5]\nterm 2: [0.5 0 ; 0 -0.5]\n").unwrap();
    let o = hamsim(&["simulate", "--out", tmp.path().to_str().unwrap(), input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let msg = stderr(&o);
    assert!(msg.contains("AmplificationOverflow") && msg.contains("stage: pipeline"), "{msg}");
}

#[test]
fn missing_input_exit_two() {
    let tmp = TempDir::new().unwrap();
    let o = hamsim(&["simulate", "--out", tmp.path().to_str().unwrap(), "no/such/file.ham"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn t_sweep_writes_fit() {
    let tmp = TempDir::new().unwrap();
    let out = out_dir(&tmp, "t");
    let o = hamsim(&["sweep", "t", "--out", out.to_str().unwrap(), &doc("tfim3.ham")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("sweep_t.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "param,value,counter,measured,expected_law,fit");
    assert_eq!(rows.len(), 6);
    assert!(rows[1].starts_with("t,1,poly_degree,") && rows[1].contains("slope="));
}

#[test]
fn samples_sweep_has_half_slope() {
    let tmp = TempDir::new().unwrap();
    let o = hamsim(&["sweep", "samples", "--out", tmp.path().to_str().unwrap(), &doc("tfim3.ham")]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("verdict=pass"));
}

#[test]
fn delta_and_k_sweeps_pass() {
    let tmp = TempDir::new().unwrap();
    for param in ["delta", "K", "sparsity"] {
        let o = hamsim(&["sweep", param, "--out", tmp.path().to_str().unwrap(), &doc("tfim3.ham")]);
        assert!(o.status.success(), "{param}: {}", stderr(&o));
    }
}

#[test]
fn failed_verdict_is_nonzero() {
    let tmp = TempDir::new().unwrap();
    let o = hamsim(&["sweep", "K", "--values", "1,2,3", "--out", tmp.path().to_str().unwrap(), &doc("tfim3.ham")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("VerdictFailed"));
}

fn write_vector(tmp: &TempDir, name: &str, amps: &[&str]) -> String {
    let path = tmp.path().join(name);
    fs::write(&path, amps.join("\n")).unwrap();
    path.to_string_lossy().into_owned()
}

fn summary_value(stdout: &str, key: &str) -> f64 {
    let line = stdout.lines().find(|l| l.starts_with(key)).unwrap();
    line.split_whitespace().nth(1).unwrap().parse().unwrap()
}

#[test]
fn truncate_basis_vector() {
    let tmp = TempDir::new().unwrap();
    let v = write_vector(&tmp, "e2.vec", &["0", "0", "1", "0"]);
    let o = hamsim(&["truncate", "--sparsity", "1", "--out", tmp.path().to_str().unwrap(), &v]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(summary_value(&stdout, "epsilon"), 0.0);
    assert!((summary_value(&stdout, "success_prob") - 1.0).abs() < 1e-12);
}

#[test]
fn truncate_uniform_sixteen() {
    let tmp = TempDir::new().unwrap();
    let v = write_vector(&tmp, "u.vec", &["0.25"; 16]);
    let o = hamsim(&["truncate", "--sparsity", "4", "--out", tmp.path().to_str().unwrap(), &v]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("holds true"));
    let csv = fs::read_to_string(tmp.path().join("ensemble.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 17);
    assert!(tmp.path().join("truncate.txt").exists());
}

#[test]
fn truncate_validation_exit_two() {
    let tmp = TempDir::new().unwrap();
    let v = write_vector(&tmp, "u.vec", &["0.5"; 4]);
    let o = hamsim(&["truncate", "--sparsity", "5", "--out", tmp.path().to_str().unwrap(), &v]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("SparsityOutOfRange"));
    let bad = write_vector(&tmp, "bad.vec", &["1", "1"]);
    let o = hamsim(&["truncate", "--sparsity", "1", "--out", tmp.path().to_str().unwrap(), &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("NotUnit"));
}
