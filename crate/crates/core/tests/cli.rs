use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cpf_gate::cli::{EXIT_CONFIG, THREADS_ENV};

fn sim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sim"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env(THREADS_ENV, "2")
        .output()
        .expect("sim runs")
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn config_path(name: &str) -> String {
    format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn fidelity_sweep_is_bitwise_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(sim(a.path(), &["fidelity", "--plot"]).status.success());
    assert!(sim(b.path(), &["fidelity"]).status.success());
    let csv_a = fs::read(a.path().join("fidelity_photon.csv")).unwrap();
    let csv_b = fs::read(b.path().join("fidelity_photon.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    assert!(a.path().join("fidelity_photon.svg").exists());
    assert!(!b.path().join("fidelity_photon.svg").exists());
    assert_eq!(
        first_line(&a.path().join("fidelity_photon.csv")),
        "x_value,fidelity,eps_00,eps_01,eps_11,eta_00,eta_01,eta_11,xi_00,xi_01,xi_11,mean_photon_exact"
    );
    let text = String::from_utf8(csv_a).unwrap();
    assert_eq!(text.lines().count(), 24);
    assert!(text.lines().nth(1).unwrap().starts_with("0.00000000000e0,1.00000000000e0,"));
}

#[test]
fn coupling_config_sweeps_dg_over_g() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(dir.path(), &["fidelity", "--config", &config_path("coupling.toml")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("fidelity_coupling.csv")).unwrap();
    let xs: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(xs.first(), Some(&"-5.00000000000e-1"));
    assert_eq!(xs.last(), Some(&"5.00000000000e-1"));
}

#[test]
fn levels_table_golden_rows() {
    let dir = tempfile::tempdir().unwrap();
    assert!(sim(dir.path(), &["levels"]).status.success());
    let text = fs::read_to_string(dir.path().join("levels.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "delta_rad_per_s,e_lower_rad_per_s,e_upper_rad_per_s,gap_rad_per_s");
    assert_eq!(lines.len(), 202);
    // δ = 0 sits in the middle with gap 2T = 2π × 10 GHz.
    let mid: Vec<f64> = lines[101].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(mid[0], 0.0);
    assert!((mid[3] - 2.0 * std::f64::consts::PI * 1e10).abs() < 1e-2);
}

#[test]
fn reflect_writes_summary_and_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(dir.path(), &["reflect", "--backend", "analytic"]);
    assert!(out.status.success());
    let summary = fs::read_to_string(dir.path().join("reflect_summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "state,backend,re_xi,im_xi,abs_ratio,epsilon,eta,phi");
    assert_eq!(lines.len(), 5);
    for l in &lines[1..] {
        let cols: Vec<&str> = l.split(',').collect();
        assert_eq!(cols[1], "analytic");
        assert_eq!((cols[5], cols[6]), ("0.00000000000e0", "0.00000000000e0"));
    }
    assert!(lines[4].starts_with("11,analytic,-1.00000000000e0,"));
    assert!(lines[4].ends_with(",3.14159265359e0"));
    for st in ["00", "01", "10", "11"] {
        let p = dir.path().join(format!("trajectory_{st}.csv"));
        assert_eq!(first_line(&p), "t_s,re_f_in,im_f_in,re_g_out,im_g_out,re_c,im_c");
    }

    let out = sim(dir.path(), &["reflect", "--backend", "filter"]);
    assert!(out.status.success());
    let summary = fs::read_to_string(dir.path().join("reflect_summary.csv")).unwrap();
    let phi: f64 = summary.lines().nth(4).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((phi.abs() - std::f64::consts::PI).abs() < 0.02);
}

#[test]
fn regime_report_lists_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(dir.path(), &["regime"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for needle in ["zeeman_gap", "s = g^2 T1 / kappa = 144.0000", "all passed: true", "spin T2* = 4.0000e-9"] {
        assert!(text.contains(needle), "missing {needle}:\n{text}");
    }
}

#[test]
fn config_errors_exit_with_their_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = fs::read_to_string(config_path("default.toml")).unwrap().replace("g_over_2pi_MHz", "g_MHz");
    fs::write(&bad, text).unwrap();
    let out = sim(dir.path(), &["regime", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("g_MHz"), "{err}");

    let out = sim(dir.path(), &["regime", "--config", "/does/not/exist.toml"]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn numerical_failures_exit_with_their_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny_fock.toml");
    let text = fs::read_to_string(config_path("default.toml"))
        .unwrap()
        .replace("alpha = 0.5", "alpha = 3.0")
        .replace("fock_dim = 16", "fock_dim = 3");
    fs::write(&cfg, text).unwrap();
    let out = sim(dir.path(), &["reflect", "--backend", "master", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(cpf_gate::cli::EXIT_NUMERICAL));
    assert!(String::from_utf8(out.stderr).unwrap().contains("Fock"));
}
