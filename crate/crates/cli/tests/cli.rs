use std::process::{Command, Output};

use grbm_cli::parallel;
use grbm_core::{SampleSpace, SweepMode, SweepSpec, VaryFamily};

fn grbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grbm"))
        .args(args)
        .env_remove("GRBM_THREADS")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn free_energy_sweep_layout() {
    let out = grbm(&["sweep", "--vary", "w", "--trials", "4", "--sd-grid", "0.1,0.5"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "sd,f_exact_mean,f1_mean,f2_mean,n_unconverged,n_trials");
    assert_eq!(lines.len(), 3);
    for line in &lines[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 6);
        let f: Vec<f64> = cols[1..4].iter().map(|c| c.parse().unwrap()).collect();
        assert!(f[1] >= f[2] - 1e-9 && f[2] >= f[0] - 1e-9, "{line}");
        assert_eq!(cols[5], "4");
    }
}

#[test]
fn mse_sweep_tsv_header() {
    let out = grbm(&["sweep", "--mode", "mse", "--vary", "b", "--space", "ternary", "--n-hidden", "4", "--trials", "2", "--sd-grid", "0.2", "--format", "tsv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), "sd\tmse1_h\tmse1_v\tmse2_h\tmse2_v\tn_unconverged\tn_trials");
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(grbm(&["sweep", "--vary", "q"]).status.code(), Some(2));
    assert_eq!(grbm(&["sweep", "--vary", "w", "--bogus"]).status.code(), Some(2));
    assert_eq!(grbm(&["sweep", "--vary", "w", "--sd-grid", "0.5,0.1"]).status.code(), Some(2));
    assert_eq!(grbm(&["sweep", "--vary", "w", "--space", "custom:1,1"]).status.code(), Some(2));
    assert_eq!(grbm(&["sweep", "--vary", "w", "--trials", "0"]).status.code(), Some(2));
}

#[test]
fn state_cap_breach_exits_3() {
    let out = grbm(&["sweep", "--vary", "w", "--trials", "1", "--state-cap", "100"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());
}

#[test]
fn check_prints_summary() {
    let out = grbm(&["check", "--instances", "20", "--seed", "1"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().next().unwrap(), "20/20 instances: F1 >= F2 >= F");
}

#[test]
fn gibbs_check_passes_on_small_run() {
    let out = grbm(&["gibbs-check", "--repetitions", "2", "--sweeps", "20000"]);
    assert!(out.status.success(), "{}", stdout(&out));
}

#[test]
fn inspect_reports_free_energies() {
    let out = grbm(&["inspect", "--n-visible", "3", "--n-hidden", "2", "--seed", "5"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("# instance seed"));
    assert!(!text.is_empty());
}

#[test]
fn threads_env_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_grbm"))
        .args(["sweep", "--vary", "w", "--trials", "1", "--sd-grid", "0.1"])
        .env("GRBM_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn parallel_sweep_matches_sequential() {
    let spec = SweepSpec {
        n_visible: 8,
        n_hidden: 5,
        trials: 30,
        seed: 11,
        sd_grid: vec![0.1, 0.7],
        ..SweepSpec::new(SweepMode::Mse, VaryFamily::W, SampleSpace::ternary())
    };
    let sequential = grbm_core::run_sweep(&spec).unwrap();
    for threads in [1, 3] {
        let pool = parallel::thread_pool(Some(threads)).unwrap();
        let rows = pool.install(|| parallel::run_sweep(&spec)).unwrap();
        assert_eq!(rows, sequential);
    }
}
