//! Black-box checks of the walrec binary: output schemas, determinism,
//! atomicity of failed runs, and the error contract.

use std::path::Path;
use std::process::{Command, Output};

fn walrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_walrec"))
        .args(args)
        .output()
        .expect("spawn walrec")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name))
        .unwrap_or_else(|e| panic!("missing {name}: {e}"))
}

/// Data rows of a CSV, comments and the header stripped, cells split on ','.
fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn comment_value(csv: &str, key: &str) -> f64 {
    let prefix = format!("# {key}=");
    csv.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no {key} comment"))
        .parse()
        .unwrap()
}

#[test]
fn ssr_haar_sweep_has_theta_equal_n_and_seed_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = walrec(&[
        "ssr",
        "--wavelet",
        "haar",
        "--level",
        "4",
        "--seed",
        "7",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "ssr.csv");
    assert!(csv.starts_with("# seed=7\nN,Theta,mu\n"), "header: {csv}");
    let table = rows(&csv);
    assert_eq!(table.len(), 4, "levels 1..=4");
    for r in &table {
        assert_eq!(r[0], r[1], "Haar reaches theta=2 exactly at M=N");
        let mu: f64 = r[2].parse().unwrap();
        assert!(mu <= 2.0 + 1e-9, "mu {mu} above theta");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let args = |dir: &str| {
        vec![
            "reconstruct".into(),
            "--wavelet".into(),
            "db2".into(),
            "--level".into(),
            "3".into(),
            "--mmax".into(),
            "16".into(),
            "--depth".into(),
            "9".into(),
            "--out".into(),
            dir.to_string(),
        ]
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let argv = args(d.path().to_str().unwrap());
        let refs: Vec<&str> = argv.iter().map(String::as_str).collect();
        let out = walrec(&refs);
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["reconstruction.csv", "errors.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }
}

#[test]
fn failed_ssr_run_reports_one_error_line_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    // Budget of 2 samples per axis cannot reach theta=2 at N=8.
    let out = walrec(&[
        "ssr",
        "--wavelet",
        "haar",
        "--level",
        "3",
        "--mmax",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.starts_with("error: "), "stderr: {stderr}");
    assert_eq!(stderr.trim_end().lines().count(), 1, "one-line errors: {stderr}");
    let leftovers: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert!(leftovers.is_empty(), "failed run left files: {leftovers:?}");
}

#[test]
fn missing_out_flag_is_an_error() {
    let out = walrec(&["ssr", "--wavelet", "haar", "--level", "2"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("--out"), "stderr: {stderr}");
}

#[test]
fn reconstruct_with_zero_budget_writes_zero_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = walrec(&[
        "reconstruct",
        "--level",
        "3",
        "--mmax",
        "0",
        "--depth",
        "8",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let table = rows(&read(dir.path(), "errors.csv"));
    assert_eq!(table.len(), 3);
    for r in &table {
        assert_eq!(r[1].parse::<f64>().unwrap(), 0.0, "{} l2_error", r[0]);
        assert_eq!(r[2].parse::<f64>().unwrap(), 0.0, "{} consistency", r[0]);
    }
}

#[test]
fn gramian_outputs_parse_and_haar_block_structure_shows() {
    let dir = tempfile::tempdir().unwrap();
    let out = walrec(&[
        "gramian",
        "--wavelet",
        "haar",
        "--level",
        "3",
        "--mmax",
        "8",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let csv = read(dir.path(), "gramian.csv");
    let mut mag = vec![vec![0.0f64; 8]; 8];
    for r in rows(&csv) {
        let (i, j): (usize, usize) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        let (re, im): (f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap());
        mag[i][j] = (re * re + im * im).sqrt();
    }
    // Walsh row 0 only meets the scaling function; sequencies 1.. are
    // orthogonal to it. The first wavelet IS the sequency-1 function.
    assert!((mag[0][0] - 1.0).abs() < 1e-12, "constant pairing {}", mag[0][0]);
    assert!((mag[1][1] - 1.0).abs() < 1e-12, "mother wavelet pairing {}", mag[1][1]);
    for k in 1..8 {
        assert!(mag[0][k] < 1e-12 && mag[k][0] < 1e-12, "block leak at {k}");
    }
    let mu = comment_value(&csv, "mu");
    assert!((mu - 1.0).abs() < 1e-9, "square Haar/Walsh gramian is unitary, mu={mu}");

    let pgm = std::fs::read(dir.path().join("gramian.pgm")).unwrap();
    let header = String::from_utf8_lossy(&pgm[..20.min(pgm.len())]);
    assert!(header.starts_with("P5\n8 8\n255\n"), "pgm header: {header}");
    assert_eq!(pgm.len(), "P5\n8 8\n255\n".len() + 64, "payload is 8x8 bytes");
}

#[test]
fn approx_rate_decay_is_monotone_with_negative_slope() {
    let dir = tempfile::tempdir().unwrap();
    let out = walrec(&[
        "approx-rate",
        "--wavelet",
        "db2",
        "--level",
        "7",
        "--depth",
        "12",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "decay.csv");
    let eps: Vec<f64> = rows(&csv).iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(eps.len() >= 4);
    for w in eps.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "epsilon must not grow: {w:?}");
    }
    assert!(comment_value(&csv, "slope") < 0.0);
}

#[test]
fn approx_rate_wants_exactly_one_basis() {
    let both = walrec(&["approx-rate", "--sampling", "walsh", "--wavelet", "db2", "--out", "/tmp/x"]);
    assert!(!both.status.success());
    let neither = walrec(&["approx-rate", "--out", "/tmp/x"]);
    assert!(!neither.status.success());
}

#[test]
fn selftest_passes() {
    let out = walrec(&["selftest", "--seed", "3"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("all checks passed"), "stdout: {stdout}");
}
