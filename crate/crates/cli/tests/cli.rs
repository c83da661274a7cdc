use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reservoir-sim")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--replicas", "50", "--cycles", "6", "--seed", "7", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn simulate_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("fig4.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(dir.path().join("events.csv").exists());
    let meta = std::fs::read_to_string(dir.path().join("run_meta.toml")).unwrap();
    assert!(meta.contains("master_seed = 7"), "{meta}");
}

#[test]
fn simulate_is_reproducible_and_flags_take_effect() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    assert!(simulate(a.path(), &[]).status.success());
    assert!(simulate(b.path(), &[]).status.success());
    assert!(simulate(c.path(), &["--transport-failure", "stay", "--success-def", "maintained"]).status.success());
    let read = |d: &Path| std::fs::read(d.join("fig4.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let meta = std::fs::read_to_string(c.path().join("run_meta.toml")).unwrap();
    assert!(meta.contains("transport_failure = \"stay\""), "{meta}");
    assert!(meta.contains("success_definition = \"maintained\""), "{meta}");
}

#[test]
fn simulate_reads_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[experiment]\nn_replicas = 5\nn_cycles = 3\n\n[stochastic]\np_transport = 0.9\n").unwrap();
    let out = dir.path().join("out");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(out.join("fig4.csv")).unwrap().lines().count(), 4);
}

#[test]
fn invalid_config_fails_with_key_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[stochastic]\np_transport = 2.0\n").unwrap();
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("p_transport"), "{}", stderr(&o));

    std::fs::write(&cfg, "[stochastic]\nno_such_key = 1\n").unwrap();
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no_such_key"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_reports_path() {
    let o = run(&["simulate", "--config", "/nonexistent/run.toml", "--out", "/tmp/unused"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/nonexistent/run.toml"), "{}", stderr(&o));
}

#[test]
fn calibrate_prints_the_value() {
    let o = run(&["calibrate", "--target-delivered", "10", "--replicas", "200", "--tolerance", "0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let value: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("mean_ensemble_at_full = "))
        .expect("value line")
        .parse()
        .unwrap();
    assert!((1.0..=40.0).contains(&value));
}

#[test]
fn unreachable_calibration_target_fails() {
    let o = run(&["calibrate", "--target-delivered", "0", "--replicas", "20"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no mean_ensemble_at_full"), "{}", stderr(&o));
}
