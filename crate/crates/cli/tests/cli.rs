use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::json;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_demand-frontier"));
    c.env("DEMAND_FRONTIER_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, value: serde_json::Value) -> String {
    let p = dir.join("config.json");
    fs::write(&p, serde_json::to_string_pretty(&value).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

fn small_config(out: &Path) -> serde_json::Value {
    json!({
        "schema_version": 1,
        "seed": 5,
        "output_dir": out,
        "data": {"synthetic": {"n_households": 8, "n_hours": 520}},
        "frontier": {
            "partitions": 2,
            "lead_times": [4],
            "approaches": ["random", "sr"],
            "objective_hours": 336,
            "out_of_sample_hours": 168,
            "window_stride": 53,
            "delta_grid": [0.05],
            "delta_tuning_series": 1,
            "random_samples": 2,
            "ga": {"population_size": 10, "max_generations": 5, "stall_generations": 2}
        },
        "aggstudy": {
            "group_sizes": [1, 8],
            "groups_per_size": 2,
            "lead_times": [4],
            "train_hours": 336,
            "window_stride": 53,
            "ensemble_size": 100
        }
    })
}

#[test]
fn synth_is_deterministic_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), small_config(dir.path()));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["--config", &cfg, "--out", out.to_str().unwrap(), "synth"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let pa = fs::read(a.join("panel.csv")).unwrap();
    assert_eq!(pa, fs::read(b.join("panel.csv")).unwrap());
    // header plus one row per household-hour, minus the synthesized gaps
    let rows = String::from_utf8(pa).unwrap().lines().count() - 1;
    assert!(rows <= 8 * 520 && rows > 8 * 520 * 9 / 10, "{rows}");

    let o = run(&[
        "--config",
        &cfg,
        "--out",
        a.to_str().unwrap(),
        "--seed",
        "6",
        "synth",
    ]);
    assert!(o.status.success());
    assert_ne!(
        fs::read(a.join("panel.csv")).unwrap(),
        fs::read(b.join("panel.csv")).unwrap()
    );

    let o = run(&["--out", a.to_str().unwrap(), "check-outputs"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("panel.csv"));
}

#[test]
fn validate_config_reports_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), small_config(dir.path()));
    let o = run(&["--config", &good, "validate-config"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let mut bad = small_config(dir.path());
    bad["frontier"]["window_stride"] = json!(100);
    let bad = write_config(dir.path(), bad);
    let o = run(&["--config", &bad, "validate-config"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("prime"));

    let mut unknown = small_config(dir.path());
    unknown["frontier"]["bogus"] = json!(1);
    let unknown = write_config(dir.path(), unknown);
    assert_eq!(
        run(&["--config", &unknown, "validate-config"])
            .status
            .code(),
        Some(1)
    );

    let mut version = small_config(dir.path());
    version["schema_version"] = json!(2);
    let version = write_config(dir.path(), version);
    assert_eq!(
        run(&["--config", &version, "validate-config"])
            .status
            .code(),
        Some(1)
    );

    assert_eq!(
        run(&["--config", "/nonexistent/config.json", "run"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn small_run_writes_checkable_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), small_config(&out));
    let o = run(&["--config", &cfg, "--jobs", "1", "run"]);
    let code = o.status.code();
    assert!(
        code == Some(0) || code == Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in [
        "frontier.csv",
        "frontier.json",
        "report.csv",
        "diagnostics.json",
        "config.json",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let csv = fs::read_to_string(out.join("frontier.csv")).unwrap();
    assert!(csv.starts_with(
        "approach,lead_time_h,partition_k,expected_demand_kw,crps_kw,mae_kw,selection_bitmap"
    ));
    assert!(csv.lines().count() > 1);
    let o = run(&["--out", out.to_str().unwrap(), "check-outputs"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    // a corrupted frontier fails the check
    fs::write(out.join("frontier.csv"), "approach,oops\n").unwrap();
    assert_eq!(
        run(&["--out", out.to_str().unwrap(), "check-outputs"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn aggstudy_writes_one_row_per_size_and_lead() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("agg");
    let cfg = write_config(dir.path(), small_config(&out));
    let o = run(&["--config", &cfg, "aggstudy"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("aggstudy.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(run(&["--out", out.to_str().unwrap(), "check-outputs"])
        .status
        .success());
}

#[test]
fn check_outputs_on_empty_dir_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&["--out", dir.path().to_str().unwrap(), "check-outputs"])
            .status
            .code(),
        Some(1)
    );
}
