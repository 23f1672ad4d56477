use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use paraboloid_lab::cli::{ExperimentReport, Params, CSV_COLUMNS, EXPERIMENTS};

fn plab(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_plab"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("plab runs")
}

/// The single run directory under `out/<experiment>/`.
fn run_dir(out: &Path, experiment: &str) -> PathBuf {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(out.join(experiment)).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.pop().unwrap()
}

fn run_to(out: &Path, experiment: &str, sets: &[&str], envs: &[(&str, &str)]) -> (Output, PathBuf) {
    let mut args = vec!["run", experiment, "--out", out.to_str().unwrap()];
    for s in sets {
        args.push("--set");
        args.push(s);
    }
    let o = plab(&args, envs);
    let dir = if o.status.code() == Some(2) { out.to_path_buf() } else { run_dir(out, experiment) };
    (o, dir)
}

#[test]
fn list_names_every_experiment() {
    let o = plab(&["list"], &[]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for (name, _) in EXPERIMENTS {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

#[test]
fn run_writes_three_files_that_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("lab.toml");
    std::fs::write(&config, "seed = 11\ns = 3\n").unwrap();
    let o = plab(&["run", "frame", "--config", config.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(tmp.path(), "frame");

    let summary = std::fs::read_to_string(dir.join("summary.json")).unwrap();
    let report = ExperimentReport::from_json(&summary).unwrap();
    assert_eq!(report.to_json().unwrap(), summary);
    assert_eq!(report.params.seed, 11);
    assert_eq!(report.params.s, 3);
    assert!(report.passed);

    let resolved = std::fs::read_to_string(dir.join("config.resolved")).unwrap();
    assert_eq!(Params::from_toml(&resolved, &[]).unwrap(), report.params);

    let csv = std::fs::read_to_string(dir.join("rows.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
    assert_eq!(lines.count(), report.rows.len());
}

#[test]
fn same_seed_gives_identical_csv_on_any_thread_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (oa, da) = run_to(a.path(), "gamma-oracle", &["shifts=9"], &[("RAYON_NUM_THREADS", "1")]);
    let (ob, db) = run_to(b.path(), "gamma-oracle", &["shifts=9"], &[("RAYON_NUM_THREADS", "4")]);
    assert_eq!(oa.status.code(), ob.status.code());
    let ca = std::fs::read(da.join("rows.csv")).unwrap();
    let cb = std::fs::read(db.join("rows.csv")).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let (o, _) = run_to(tmp.path(), "warp-drive", &[], &[]);
    assert_eq!(o.status.code(), Some(2));

    let (o, _) = run_to(tmp.path(), "moments", &["q=1", "theta=3"], &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("q must") && err.contains("theta must"), "{err}");

    let (o, _) = run_to(tmp.path(), "moments", &["speed=3"], &[]);
    assert_eq!(o.status.code(), Some(2));

    let (o, _) = run_to(tmp.path(), "zero-case", &["kappa=2"], &[]);
    assert_eq!(o.status.code(), Some(2));

    let o = plab(&["run", "moments", "--config", "/nonexistent/lab.toml"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("moments").exists());
}

#[test]
fn failing_gate_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let (o, dir) = run_to(tmp.path(), "zero-case", &["s_range=[3,4]", "shifts=9"], &[]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stdout));
    let report = ExperimentReport::from_json(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert!(!report.passed);
    assert!(report.rows.iter().all(|r| r.bound > 0.0));
}
