use std::process::Command;

fn qmsvm() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_qmsvm"));
    c.env("RUST_LOG", "error");
    c
}

#[test]
fn evaluate_writes_a_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = qmsvm()
        .args(["evaluate", "--dataset", "iris", "--kernel", "xqk,lk", "--seed", "2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["config.json", "metrics.json", "report.txt", "tables/summary.csv", "tables/xqk_confusion.csv", "tables/lk_roc.csv"] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("iris train/test 105/45"));
}

#[test]
fn kernel_matrix_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = || {
        let s = qmsvm().args(["kernel-matrix", "--dataset", "tae", "--kernel", "zqk,pk", "--out"]).arg(dir.path()).output().unwrap().status;
        assert!(s.success());
        std::fs::read(dir.path().join("matrices/zqk.csv")).unwrap()
    };
    let first = run();
    let metrics = std::fs::read(dir.path().join("metrics.json")).unwrap();
    assert_eq!(run(), first);
    assert_eq!(std::fs::read(dir.path().join("metrics.json")).unwrap(), metrics);
}

#[test]
fn exit_codes_distinguish_error_kinds() {
    let code = |args: &[&str]| qmsvm().args(args).output().unwrap().status.code();
    assert_eq!(code(&["evaluate", "--dataset", "nope"]), Some(2));
    assert_eq!(code(&["evaluate", "--dataset", "iris", "--noise", "1.5"]), Some(2));
    assert_eq!(code(&["evaluate", "--dataset", "iris", "--kernel", "qqk"]), Some(2));
    assert_eq!(code(&["evaluate", "--config", "/nonexistent/config.json"]), Some(3));
    assert_eq!(code(&["evaluate", "--dataset", "iris", "--exact", "--shots", "10"]), Some(2));
}

#[test]
fn config_file_is_accepted_and_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"dataset": "tae", "kernels": ["fqk"], "seed": 5, "strategy": "cs"}"#).unwrap();
    let out = dir.path().join("out");
    let s = qmsvm().args(["generalization", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap().status;
    assert!(s.success());
    let echoed: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(echoed["seed"], 5);
    let table = std::fs::read_to_string(out.join("tables/generalization.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"dataset": "iris", "kernal": ["fqk"]}"#).unwrap();
    assert_eq!(qmsvm().args(["evaluate", "--config"]).arg(&cfg).output().unwrap().status.code(), Some(2));
}
