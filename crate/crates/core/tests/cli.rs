use std::process::Command;

fn fkd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fkd"))
}

fn write_config(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(
        &path,
        r#"{"dataset": {"source": "synthetic", "n": 60, "seed": 2},
            "model": {"type": "krr"},
            "decomposition": {"m_values": [0, 2]},
            "cv": {"k": 3}}"#,
    )
    .unwrap();
    path
}

#[test]
fn run_writes_outputs_and_seed_override_applies() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    for (out, seed) in [("a", "1"), ("b", "2")] {
        let status = fkd()
            .args(["run", "--config"])
            .arg(&config)
            .arg("--output")
            .arg(dir.path().join(out))
            .args(["--seed", seed, "--threads", "1"])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read_to_string(dir.path().join("a/summary.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b/summary.csv")).unwrap();
    assert!(a.starts_with("m,metric,mean,std\n"));
    assert_ne!(a, b);
}

#[test]
fn sweeps_and_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("sweep");
    let status = fkd()
        .args(["sweep-nystroem", "--fractions", "0.5,1.0", "--config"])
        .arg(&config)
        .arg("--output")
        .arg(&out)
        .arg("--save-transforms")
        .arg(dir.path().join("t"))
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("sweep.csv").exists());

    let status = fkd()
        .args(["sweep-alpha", "--values", "0.05,0.2", "--config"])
        .arg(&config)
        .arg("--output")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let inspect = fkd()
        .arg("inspect-transform")
        .arg(dir.path().join("t/transform_fold0_m2.fkt"))
        .output()
        .unwrap();
    assert!(inspect.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&inspect.stdout).unwrap();
    assert_eq!(summary["iterations"], 2);
}

#[test]
fn failures_emit_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = fkd()
        .args(["sweep-alpha", "--values=-1", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");

    let out = fkd()
        .args(["run", "--config", "/nonexistent.json"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");
}
