use std::process::Command;

fn simstack(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_simstack")).args(args).output().unwrap()
}

#[test]
fn gradcheck_passes_and_reports_injected_faults() {
    let ok = simstack(&["gradcheck", "--instances", "20"]);
    let text = String::from_utf8_lossy(&ok.stdout);
    assert!(ok.status.success(), "{text}");
    assert!(text.contains("sum_rate_phase_gradient") && text.contains("PASS"));

    let bad = simstack(&["gradcheck", "--instances", "3", "--fault", "conv3x3"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("worst: conv3x3"));
}

#[test]
fn run_writes_results_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "[geometry]\nlayers = 1\natoms = 4\n[codebook]\nsize = 5\n").unwrap();
    let out = dir.path().join("out");
    let o = simstack(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--scheme",
        "random,codebook,mmse",
        "--seeds",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["points"].as_array().unwrap().len(), 3);
}

#[test]
fn bad_input_exits_with_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = simstack(&["run", "--scheme", "dqn", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown scheme `dqn`"));

    let cfg = dir.path().join("typo.toml");
    std::fs::write(&cfg, "[geometry]\nlayer = 3\n").unwrap();
    let o = simstack(&["run", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("geometry.layer"));

    let o = simstack(&["sweep", "--axis", "height", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
}
