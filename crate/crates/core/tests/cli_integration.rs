mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::*;
use mcs_core::cli::{columns_to_csv, render_text};
use mcs_core::garch::{simulate, GarchParams, GarchSpec};
use mcs_core::{mcs_procedure, McsConfig, Statistic};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcs")).args(args).output().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_losses(dir: &Path) -> PathBuf {
    let loss = normal_losses(300, &[0.0, 0.05, 0.1, 0.6, 0.8], 77);
    let cols: Vec<Vec<f64>> = (0..loss.m()).map(|i| loss.column(i).to_vec()).collect();
    let path = dir.join("loss.csv");
    fs::write(&path, columns_to_csv(loss.names(), &cols).unwrap()).unwrap();
    path
}

fn golden_input() -> mcs_core::LossMatrix {
    normal_losses(400, &[0.0, 0.02, 0.05, 0.1, 0.15, 0.5, 0.9], 2718)
}

fn golden_config() -> McsConfig {
    McsConfig {
        alpha: 0.2,
        resamples: 500,
        statistic: Statistic::Tmax,
        seed: 7,
        ..McsConfig::default()
    }
}

#[test]
fn mcs_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_losses(dir.path());
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("ssm{k}.csv"));
        let o = bin(&[
            "mcs", path_str(&input), "--B", "300", "--seed", "5", "--format", "csv", "--threads", threads,
            "--out", path_str(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let manifest = fs::read_to_string(dir.path().join(format!("ssm{k}.csv.manifest.json"))).unwrap();
        outputs.push((fs::read(&out).unwrap(), manifest));
    }
    assert_eq!(outputs[0].0, outputs[1].0);
    assert!(outputs[0].1.contains("\"command\": \"mcs\""));
    assert!(outputs[0].1.contains("\"seed\": 5"));
}

#[test]
fn replay_reproduces_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_losses(dir.path());
    let out = dir.path().join("ssm.csv");
    let o = bin(&["mcs", path_str(&input), "--B", "200", "--seed", "9", "--format", "csv", "--out", path_str(&out)]);
    assert!(o.status.success());
    let first = fs::read(&out).unwrap();
    let manifest = dir.path().join("ssm.csv.manifest.json");
    let recorded = fs::read(&manifest).unwrap();
    fs::remove_file(&out).unwrap();
    let o = bin(&["replay", path_str(&manifest)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(&out).unwrap(), first);
    assert_eq!(fs::read(&manifest).unwrap(), recorded);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_losses(dir.path());
    let o = bin(&["mcs", path_str(&input), "--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(String::from_utf8_lossy(&o.stderr).trim().lines().count(), 1);
    assert_eq!(bin(&["mcs", path_str(&input), "--bogus"]).status.code(), Some(1));
    assert_eq!(bin(&["mcs", "/nonexistent/loss.csv"]).status.code(), Some(2));
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "a,b\n1,x\n").unwrap();
    let o = bin(&["mcs", path_str(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
}

#[test]
fn loss_then_mcs_then_backtest() {
    let dir = tempfile::tempdir().unwrap();
    let y = normals(400, 3);
    let realized = dir.path().join("y.csv");
    fs::write(&realized, columns_to_csv(&["ret".to_string()], std::slice::from_ref(&y)).unwrap()).unwrap();
    let var_cols = vec![vec![-1.6449; 400], vec![-2.3263; 400], vec![-0.5; 400]];
    let names = vec!["q05".to_string(), "q01".to_string(), "bad".to_string()];
    let var = dir.path().join("var.csv");
    fs::write(&var, columns_to_csv(&names, &var_cols).unwrap()).unwrap();

    let loss = dir.path().join("loss.csv");
    let o = bin(&[
        "loss", "--kind", "VaR", "--tau", "0.05", "--realized", path_str(&realized), "--evaluated", path_str(&var),
        "--out", path_str(&loss),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&loss).unwrap();
    assert_eq!(text.lines().next().unwrap(), "q05,q01,bad");
    assert_eq!(text.lines().count(), 401);

    let report = dir.path().join("ssm.txt");
    let o = bin(&["mcs", path_str(&loss), "--B", "200", "--out", path_str(&report)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(&report).unwrap().contains("Superior Set of Models"));

    let bt = dir.path().join("bt.csv");
    let o = bin(&[
        "backtest", "--returns", path_str(&realized), "--var", path_str(&var), "--tau", "0.05", "--out",
        path_str(&bt),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&bt).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "series,n,tau,violations,AE,ADmean,ADmax");
    let q05: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(q05[0], "q05");
    let hits = y.iter().filter(|&&v| v < -1.6449).count();
    assert_eq!(q05[3], hits.to_string());
}

#[test]
fn garch_roll_writes_one_column_per_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = GarchSpec::new(mcs_core::garch::Dynamics::Garch11, mcs_core::garch::Innovation::Gaussian);
    let y = simulate(&spec, &GarchParams::garch(0.0, 0.1, 0.08, 0.85), 300, 100, 12).unwrap();
    let input = dir.path().join("ret.csv");
    fs::write(&input, columns_to_csv(&["r".to_string()], &[y]).unwrap()).unwrap();
    let out = dir.path().join("var.csv");
    let o = bin(&[
        "garch-roll", path_str(&input), "--dynamics", "garch,gjr", "--innovation", "norm,std", "--forecast-length",
        "40", "--refit-every", "20", "--tau", "0.05", "--out", path_str(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "garch-norm,garch-std,gjr-norm,gjr-std");
    assert_eq!(text.lines().count(), 41);
    let o = bin(&["garch-roll", path_str(&input), "--forecast-length", "250", "--refit-every", "10"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn golden_report() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden_report.txt");
    let result = mcs_procedure(&golden_input(), &golden_config()).unwrap();
    let text = render_text(&result.without_timing());
    if std::env::var_os("MCS_UPDATE_GOLDEN").is_some() {
        fs::write(&golden, &text).unwrap();
    }
    let expected = fs::read_to_string(&golden).unwrap();
    assert_eq!(text, expected);

    // the binary prints the same report apart from the elapsed time
    let dir = tempfile::tempdir().unwrap();
    let loss = golden_input();
    let cols: Vec<Vec<f64>> = (0..loss.m()).map(|i| loss.column(i).to_vec()).collect();
    let input = dir.path().join("loss.csv");
    fs::write(&input, columns_to_csv(loss.names(), &cols).unwrap()).unwrap();
    let o = bin(&["mcs", path_str(&input), "--B", "500", "--seed", "7", "--alpha", "0.2"]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    let strip = |s: &str| -> Vec<String> {
        s.lines().filter(|l| !l.starts_with("Elapsed Time")).map(String::from).collect()
    };
    assert_eq!(strip(&stdout), strip(&expected));
}
