//! End-to-end checks of the command-line interface: subcommands, exit codes,
//! output files, and determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lwr-control")
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lwr_cli_{tag}_{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn run_exports_expected_files() {
    let dir = scratch("run");
    let out_dir = dir.join("out");
    let cfg = write_config(
        &dir,
        "scenario.cfg",
        &format!(
            "t_end = 0.3\nn_cells = 50\nsnapshot_times = 0, 0.3\nout_dir = {}\n",
            out_dir.display()
        ),
    );
    let out = run(&["run", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "timeseries.csv",
        "snapshot_0.csv",
        "snapshot_0.3.csv",
        "v.svg",
        "b.svg",
        "inputs.svg",
        "snapshots.svg",
    ] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    let text = fs::read_to_string(out_dir.join("timeseries.csv")).unwrap();
    assert!(text.starts_with("t,V,B,C,D,omega_a,omega_b,active,feasible,violation\n"));
    assert_eq!(text.lines().count(), 22); // header + 21 control instants
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn identical_configs_produce_bit_identical_csv() {
    let dir = scratch("determinism");
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for (name, out) in [("a.cfg", &out_a), ("b.cfg", &out_b)] {
        let cfg = write_config(
            &dir,
            name,
            &format!(
                "controller_mode = two_input\nt_end = 0.6\nn_cells = 64\nout_dir = {}\n",
                out.display()
            ),
        );
        let result = run(&["run", cfg.to_str().unwrap()]);
        assert!(result.status.success());
    }
    let bytes_a = fs::read(out_a.join("timeseries.csv")).unwrap();
    let bytes_b = fs::read(out_b.join("timeseries.csv")).unwrap();
    assert_eq!(bytes_a, bytes_b, "CSV output must be bit-identical");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn intervals_reports_split_points() {
    let dir = scratch("intervals");
    let cfg = write_config(&dir, "default.cfg", "");
    let out = run(&["intervals", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    let grab = |key: &str| -> f64 {
        text.lines()
            .find(|l| l.starts_with(key))
            .and_then(|l| l.split('=').nth(1))
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or_else(|| panic!("missing {key} in: {text}"))
    };
    assert!((grab("u1") - 5.0 / 12.0).abs() < 1e-8);
    assert!((grab("u2") - 0.25).abs() < 1e-8);
    assert!(text.contains("stability_left") && text.contains("invariance_right"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn validate_flux_passes_for_builtins() {
    let dir = scratch("validate");
    let cfg = write_config(&dir, "log.cfg", "flux = greenberg_log\nepsilon = 0.1\n");
    let out = run(&["validate-flux", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("PASS"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_errors_exit_with_code_one() {
    let dir = scratch("config_err");
    let unknown = write_config(&dir, "unknown.cfg", "wavelength = 7\n");
    let out = run(&["run", unknown.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("wavelength"));

    let invalid = write_config(&dir, "invalid.cfg", "u_star = 2\n");
    let out = run(&["run", invalid.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["run", dir.join("missing.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn oracle_check_small_sample_passes() {
    let dir = scratch("oracle");
    let cfg = write_config(&dir, "default.cfg", "");
    let out = run(&[
        "oracle-check",
        cfg.to_str().unwrap(),
        "--samples",
        "200",
        "--seed",
        "7",
    ]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("Left") && text.contains("Right"));
    assert!(text.contains("0 mismatches"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn sweep_runs_one_scenario_per_value() {
    let dir = scratch("sweep");
    let out_dir = dir.join("batch");
    let cfg = write_config(
        &dir,
        "base.cfg",
        &format!(
            "t_end = 0.15\nn_cells = 40\nsnapshot_times =\nout_dir = {}\n",
            out_dir.display()
        ),
    );
    let out = run(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--param",
        "u_star",
        "--values",
        "0.2",
        "0.3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("u_star_0.2/timeseries.csv").exists());
    assert!(out_dir.join("u_star_0.3/timeseries.csv").exists());

    // A bad sweep value must fail fast with a config error.
    let out = run(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--param",
        "u_star",
        "--values",
        "2.5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    fs::remove_dir_all(&dir).ok();
}
