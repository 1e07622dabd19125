use std::path::Path;
use std::process::{Command, Output};

use ecap_cli::{cmd_run, cmd_sweep, RunConfig, SweepGrid};

const SMALL: &[&str] = &[
    "--set", "height=12", "--set", "width=12", "--set", "n_source=6", "--set", "n_target=10",
    "--set", "hidden=6", "--set", "samples=2", "--iterations", "30",
];

fn ecap(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ecap"));
    cmd.args(args).env_remove("ECAP_OUT_DIR");
    if let Some(dir) = env_out {
        cmd.env("ECAP_OUT_DIR", dir);
    }
    cmd.output().unwrap()
}

fn small_config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::parse(
        "height = 12\nwidth = 12\nn_source = 6\nn_target = 10\nhidden = 6\niterations = 30\nsamples = 2",
    )
    .unwrap();
    cfg.out_dir = out.to_path_buf();
    cfg
}

#[test]
fn flag_overrides_file_and_artifacts_stay_in_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.cfg");
    std::fs::write(&file, "n0 = 1.0\nbeta = 0.9\n").unwrap();
    let out = dir.path().join("out");
    let mut args = vec!["run", "--config", file.to_str().unwrap(), "--n0", "0.53", "--out", out.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    let res = ecap(&args, None);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let written = RunConfig::parse(&std::fs::read_to_string(out.join("config.txt")).unwrap()).unwrap();
    assert_eq!(written.train.sampler.n0, 0.53);
    assert_eq!(written.train.sampler.beta, 0.9);
    for f in ["metrics.csv", "report.txt", "banks.bin"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let pngs = std::fs::read_dir(out.join("samples")).unwrap().count();
    assert_eq!(pngs, 6);
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 31);

    let first = std::fs::read(out.join("metrics.csv")).unwrap();
    assert!(ecap(&args, None).status.success());
    assert_eq!(std::fs::read(out.join("metrics.csv")).unwrap(), first);
}

#[test]
fn invalid_values_name_the_key() {
    let res = ecap(&["run", "--beta", "1.5"], None);
    assert!(!res.status.success());
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("beta") && err.contains("(0, 1)"), "{err}");

    let res = ecap(&["run", "--set", "lambda=3"], None);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("lambda"));
}

#[test]
fn env_var_sets_default_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "--variant", "baseline"];
    args.extend_from_slice(SMALL);
    let res = ecap(&args, Some(dir.path()));
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(dir.path().join("report.txt").is_file());
}

#[test]
fn inspect_bank_exports_sorted_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    cmd_run(&cfg).unwrap();
    let snapshot = dir.path().join("banks.bin");
    let banks = ecap_core::BankSet::load(&snapshot).unwrap();
    let class = (0..banks.num_classes()).max_by_key(|&c| banks.bank(c).len()).unwrap();
    let out = dir.path().join("inspect");
    let res = ecap(
        &["inspect-bank", snapshot.to_str().unwrap(), "--class", &class.to_string(), "--k", "3", "--out", out.to_str().unwrap()],
        None,
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let n = banks.bank(class).len().min(3);
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 2 * n);
    assert!(out.join(format!("class{class}_rank00_img{}_image.png", banks.bank(class).entries()[banks.bank(class).ranked()[0]].image_id.0)).is_file());

    let res = ecap(&["inspect-bank", snapshot.to_str().unwrap(), "--class", "99"], None);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("unknown class"));
}

#[test]
fn single_point_sweep_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&dir.path().join("run"));
    let run = cmd_run(&cfg).unwrap();
    let sweep_cfg = RunConfig { out_dir: dir.path().join("sweep"), ..cfg };
    let report = cmd_sweep(&sweep_cfg, &SweepGrid::default()).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.rows[0].outcome.metrics, run.metrics);
    assert_eq!(report.rows[0].outcome.records, run.records);
    assert!(dir.path().join("sweep/sweep.txt").is_file());
}
