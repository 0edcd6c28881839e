use std::process::{Command, Output};

fn ringamp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ringamp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr has a line");
    serde_json::from_str(line).expect("last stderr line is JSON")
}

#[test]
fn verify_passes_for_duffing() {
    let out = ringamp(&["verify", "--model", "duffing", "--n", "8"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 4, "{text}");
    assert!(!text.contains("FAIL"));
}

#[test]
fn unknown_subcommand_is_a_config_error() {
    let out = ringamp(&["bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(stderr_json(&out)["exit_code"], 2);
}

#[test]
fn spectrum_csv_has_header_and_branches() {
    let out = ringamp(&["spectrum", "--p", "0.2", "--num-phi", "16"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("phi,branch,re_lambda,im_lambda"));
    assert_eq!(lines.count(), 32);
}

#[test]
fn critical_and_coeffs_json() {
    let out = ringamp(&["critical"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["p_c"].as_f64().unwrap() - 0.139868).abs() < 1e-5);
    assert_eq!(v["v0"].as_array().unwrap().len(), 2);

    let out = ringamp(&["coeffs"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    for key in ["kappa1", "kappa2", "kappa3", "zeta", "v2"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!(v["zeta"][0].as_f64().unwrap() < 0.0);
}

#[test]
fn bad_config_key_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"seed": 1, "colour": "red"}"#).unwrap();
    let out = ringamp(&["--config", cfg.to_str().unwrap(), "critical"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "config");
}

#[test]
fn missing_output_directory_rejected_before_compute() {
    let out = ringamp(&["simulate", "--out", "/nonexistent/dir/traj.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"n": 3, "t_end": 1.0, "stride": 10}"#).unwrap();
    let out = ringamp(&["--config", cfg.to_str().unwrap(), "simulate", "--n", "4"]);
    assert!(out.status.success());
    let text = stdout(&out);
    // t plus 4 nodes x 2 components
    assert_eq!(text.lines().next().unwrap().split(',').count(), 9);
    assert_eq!(text.lines().count(), 1 + 11);
}

#[test]
fn same_seed_same_bytes() {
    let run = |seed: &str| {
        let out = ringamp(&["--seed", seed, "simulate", "--n", "5", "--k", "0.3", "--t-end", "20"]);
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(run("4"), run("4"));
    assert_ne!(run("4"), run("5"));
}

#[test]
fn gl_snapshots_written() {
    let dir = tempfile::tempdir().unwrap();
    let snaps = dir.path().join("snaps.csv");
    let out = ringamp(&[
        "gl", "--r", "2", "--t-end", "0.1", "--grid", "32", "--snapshot-stride", "50",
        "--snapshots", snaps.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&snaps).unwrap();
    assert_eq!(text.lines().next(), Some("T2,xi,re_u,im_u"));
    // 100 steps, stride 50: three snapshots of 32 points
    assert_eq!(text.lines().count(), 1 + 3 * 32);
}

#[test]
fn lyapunov_json_for_decoupled_ring() {
    let out = ringamp(&["lyapunov", "--n", "3", "--k", "0", "--num-exponents", "2"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    for e in v["exponents"].as_array().unwrap() {
        assert!((e.as_f64().unwrap() + 0.15).abs() < 5e-3);
    }
    assert!(!v["convergence_history"].as_array().unwrap().is_empty());
}

#[test]
fn scan_writes_one_row_per_ring_size() {
    // heavy damping puts the Hopf point above the chaos scan range, so every
    // row fails fast and is still written
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("records.csv");
    let out = ringamp(&[
        "scan", "--d", "3", "--n-list", "10,20,30", "--profile", "ci",
        "--out", records.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&records).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("N,k_H,k_Ch,k_Re"));
    assert_eq!(lines.count(), 3);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.lines().filter(|l| l.starts_with("N = ")).count(), 3);
}
