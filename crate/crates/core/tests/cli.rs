use std::fs;
use std::path::Path;
use std::process::Command;

use malt_kit::cli::run_subcommand as run;

fn run_in(dir: &Path, args: &[&str]) -> i32 {
    let out = dir.to_str().unwrap();
    let mut argv = vec!["malt-kit"];
    argv.extend_from_slice(args);
    argv.extend_from_slice(&["--out", out]);
    run(argv)
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn acf_output_is_versioned_and_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["acf", "--gamma", "0,2", "--sigma", "1", "--points", "11", "--plot"];
    assert_eq!(run_in(a.path(), &args), 0);
    assert_eq!(run_in(b.path(), &args), 0);
    let text = read(a.path(), "acf.csv");
    assert_eq!(text, read(b.path(), "acf.csv"));
    assert_eq!(read(a.path(), "acf.svg"), read(b.path(), "acf.svg"));
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# malt-kit v"));
    assert_eq!(lines.next().unwrap(), "sigma,gamma,T,rho");
    assert_eq!(lines.count(), 22);
}

#[test]
fn chain_is_byte_identical_for_a_seed() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["chain", "--preset", "gaussian-d50", "--n", "300", "--seed", "5", "--keep-coords", "1,50"];
    assert_eq!(run_in(a.path(), &args), 0);
    assert_eq!(run_in(b.path(), &args), 0);
    assert_eq!(fs::read(a.path().join("chain.csv")).unwrap(), fs::read(b.path().join("chain.csv")).unwrap());
    let other = ["chain", "--preset", "gaussian-d50", "--n", "300", "--seed", "6", "--keep-coords", "1,50"];
    assert_eq!(run_in(c.path(), &other), 0);
    assert_ne!(read(a.path(), "chain.csv"), read(c.path(), "chain.csv"));
    let text = read(a.path(), "chain.csv");
    assert_eq!(text.lines().nth(1).unwrap(), "iter,accepted,delta,x_1,x_50");
    assert_eq!(text.lines().count(), 302);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "gamma = [1.0, 3.0]\npoints = 5\ntmax = 2.0\n").unwrap();
    assert_eq!(run_in(dir.path(), &["acf", "--config", cfg.to_str().unwrap(), "--gamma", "0.5"]), 0);
    let text = read(dir.path(), "acf.csv");
    let gammas: Vec<&str> = text.lines().skip(2).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(gammas.len(), 5);
    assert!(gammas.iter().all(|g| g.parse::<f64>().unwrap() == 0.5));
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(run_in(p, &["acf", "--gamma", "-1"]), 1);
    assert_eq!(run_in(p, &["coupling", "--alpha", "1.0"]), 1);
    assert_eq!(run_in(p, &["chain", "--preset", "nope"]), 1);
    assert_eq!(run_in(p, &["chain", "--keep-coords", "51", "--n", "10"]), 1);
    assert_eq!(run_in(p, &["acf", "--no-such-flag"]), 1);
    assert_eq!(run_in(p, &["no-such-command"]), 1);
    let bad = p.join("bad.toml");
    fs::write(&bad, "gama = [1.0]\n").unwrap();
    assert_eq!(run_in(p, &["acf", "--config", bad.to_str().unwrap()]), 1);
    assert_eq!(run(["malt-kit", "--help"]), 0);
}

#[test]
fn scaling_reports_optimal_constants() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["scaling", "--dims", "64", "--T", "2", "--n", "500"]), 0);
    let report = read(dir.path(), "scaling-report.csv");
    let vals: Vec<f64> = report.lines().nth(2).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((vals[1] - 0.651).abs() < 1e-3);
    assert!(read(dir.path(), "scaling.csv").lines().nth(1).unwrap() == "d,h,mean_delta,var_delta,acceptance");
}

#[test]
fn coupling_and_ess_curve_write_plots() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(run_in(p, &["coupling", "--alpha", "0.5", "--pairs", "20", "--duration", "2", "--plot"]), 0);
    assert!(read(p, "coupling.csv").lines().nth(1).unwrap() == "label,t,mean_twisted_norm_sq");
    assert_eq!(run_in(p, &["ess-curve", "--points", "20", "--plot"]), 0);
    let svg = read(p, "ess-curve.svg");
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<svg").count(), 1);
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_malt-kit");
    let dir = tempfile::tempdir().unwrap();
    let ok = Command::new(exe)
        .args(["acf", "--points", "3", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(ok.code(), Some(0));
    let bad = Command::new(exe).args(["acf", "--h", "0"]).arg("--out").arg(dir.path()).status().unwrap();
    assert_eq!(bad.code(), Some(1));
    let version = Command::new(exe).arg("--version").output().unwrap();
    assert_eq!(version.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&version.stdout).contains(env!("CARGO_PKG_VERSION")));
}
