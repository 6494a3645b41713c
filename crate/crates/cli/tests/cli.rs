use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hodgefem::adaptivity::fit_rate;
use hodgefem::report::parse_svg_rate;

fn hodgefem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hodgefem"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(
        &path,
        format!("{body}\noutput_dir = {}\n", dir.join("out").display()),
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn huge_tolerance_gives_one_row_and_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "problem = square-k2\nalgorithm = amfem2\ntol = 1e9",
    );
    let out = hodgefem(&["run", &cfg]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "step,ntri,ndof,eta_sigma,eta_p,eta_du,eta_dsigma,marked,err_sigma_l2,err_dsigma_l2,err_p,err_du,gap,seconds");
    assert_eq!(lines.len(), 2);
    assert!(dir.path().join("out/report.json").exists());
    assert!(dir.path().join("out/mesh_final.txt").exists());
}

#[test]
fn malformed_key_exits_two_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "problem = square-k2\nthetta = 0.3");
    let out = hodgefem(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn step_cap_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "problem = square-k1\nalgorithm = amfem1\ntol = 1e-9\nmax_steps = 2",
    );
    assert_eq!(hodgefem(&["run", &cfg]).status.code(), Some(1));
}

#[test]
fn lshape_svg_annotation_matches_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "problem = lshape-k2\nalgorithm = amfem2\ntheta = 0.3\ntol = 1e-9\nmax_steps = 25\nemit_svg = true");
    let out = hodgefem(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let csv = fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    let rows: Vec<Vec<String>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert!(rows.len() <= 26);
    let n0: f64 = rows[0][1].parse().unwrap();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .skip(1)
        .map(|r| (r[1].parse::<f64>().unwrap() - n0, r[3].parse().unwrap()))
        .collect();
    let expected = fit_rate(&pts[pts.len() - 6..]).unwrap();
    let svg = fs::read_to_string(dir.path().join("out/rates.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!((parse_svg_rate(&svg).unwrap() - expected).abs() <= 1e-9);
}

#[test]
fn csv_is_bit_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "problem = annulus-k1\nalgorithm = amfem1\ntol = 1e-9\nmax_steps = 4",
    );
    hodgefem(&["run", &cfg]);
    let a = fs::read(dir.path().join("out/report.csv")).unwrap();
    let ja = fs::read(dir.path().join("out/report.json")).unwrap();
    hodgefem(&["run", &cfg]);
    assert_eq!(a, fs::read(dir.path().join("out/report.csv")).unwrap());
    assert_eq!(ja, fs::read(dir.path().join("out/report.json")).unwrap());
}

#[test]
fn diagnose_passes_and_is_seed_robust() {
    let out = hodgefem(&["diagnose"]);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(!text.contains("FAIL"));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 977");
    let other = hodgefem(&["diagnose", &cfg]);
    let verdicts = |s: &str| {
        s.lines()
            .map(|l| l.split_whitespace().next().unwrap_or("").to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(
        verdicts(&text),
        verdicts(&String::from_utf8_lossy(&other.stdout))
    );
}

#[test]
fn mesh_dump_reports_metrics_and_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("m.txt");
    fs::write(&mesh, "dim 2\n4\n0 0\n1 0\n1 1\n0 1\n2\n0 1 2 1\n0 2 3 2\n").unwrap();
    let out = hodgefem(&["mesh-dump", mesh.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["triangles"], 2);
    assert_eq!(json["edges"], 5);
    fs::write(&mesh, "dim 2\nnonsense\n").unwrap();
    assert_eq!(
        hodgefem(&["mesh-dump", mesh.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}
