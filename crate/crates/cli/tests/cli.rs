use std::fs;
use std::process::Command;

fn uwloc() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_uwloc"));
    c.env_remove("UWLOC_OUTPUT_DIR");
    c
}

#[test]
fn print_config_applies_overrides() {
    let out = uwloc()
        .args([
            "run",
            "--trials",
            "7",
            "--trajectory",
            "helix",
            "--methods",
            "diesel,static",
            "--print-config",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["trials"], 7);
    assert_eq!(v["horizon"], 5);
    assert_eq!(v["scenario"]["trajectory"]["shape"]["kind"], "helix");
    assert_eq!(v["methods"], serde_json::json!(["diesel", "static"]));
}

#[test]
fn config_file_then_flags_then_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"trials": 3, "base_seed": 9, "output_dir": "from-file"}"#,
    )
    .unwrap();
    let out = uwloc()
        .args([
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "11",
            "--print-config",
        ])
        .env("UWLOC_OUTPUT_DIR", "from-env")
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["trials"], 3);
    assert_eq!(v["base_seed"], 11);
    assert_eq!(v["output_dir"], "from-env");
}

#[test]
fn small_run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let status = uwloc()
        .args(["run", "--trials", "2", "--ticks", "12", "--workers", "1"])
        .arg("--output-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    for f in ["mean_error.csv", "cdf.csv", "summary.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let mean = fs::read_to_string(dir.path().join("mean_error.csv")).unwrap();
    assert_eq!(mean.lines().count(), 1 + 3 * 12);
}

#[test]
fn tune_ekf_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.csv");
    let out = uwloc()
        .args([
            "tune-ekf",
            "--trials",
            "2",
            "--ticks",
            "10",
            "--q-grid",
            "0.001,0.01",
            "--r-grid",
            "0.25",
        ])
        .arg("--output")
        .arg(&grid)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(&grid).unwrap().lines().count(), 3);
}

#[test]
fn oracle_tests_pass() {
    let out = uwloc()
        .args(["oracle-tests", "--instances", "5"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("all 5 instances agree"));
}

#[test]
fn errors_map_to_exit_codes() {
    let bad = uwloc().args(["run", "--trials", "0"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let missing = uwloc()
        .args(["run", "--config", "/nonexistent/c.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(4));
    let unknown = uwloc()
        .args(["run", "--methods", "kalman"])
        .output()
        .unwrap();
    assert_eq!(unknown.status.code(), Some(2));
}
