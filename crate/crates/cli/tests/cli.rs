use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lzsweep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lzsweep"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_delta_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"system": {"v": 1.0}}"#);
    let o = lzsweep(&["predict", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("delta"), "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_prints_usage() {
    let o = lzsweep(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn missing_config_flag_is_a_config_error() {
    let o = lzsweep(&["simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--config"));
}

#[test]
fn numerical_failure_exits_one() {
    // a norm tolerance no integrator can meet
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"system": {"delta": 1.0, "v": 1.0},
            "numerics": {"control": {"norm_tolerance": 1e-300}}}"#,
    );
    let o = lzsweep(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn predict_examples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"system": {"delta": 1.0},
            "decoherence": {"kind": "classical", "model": "ornstein_uhlenbeck", "amplitude": 0.1, "tau": 0.1}}"#,
    );
    let o = lzsweep(&["predict", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["result"]["quadrant"], "low_amp_short_corr");
    let v = doc["result"]["v_optimal"].as_f64().unwrap();
    assert!((v - 0.1448).abs() < 1e-4);

    let cfg = write(
        dir.path(),
        "h.json",
        r#"{"system": {"delta": 1.0},
            "decoherence": {"kind": "classical", "model": "ornstein_uhlenbeck", "amplitude": 5.0, "tau": 10.0}}"#,
    );
    let o = lzsweep(&["predict", "--config", cfg.to_str().unwrap()]);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((doc["result"]["p_env_lz"].as_f64().unwrap() - 0.0432).abs() < 1e-4);
}

#[test]
fn simulate_without_noise_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"system": {"delta": 1.0, "v": 1.5707963267948966}}"#,
    );
    let o = lzsweep(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let p = doc["result"]["ground_state_population"].as_f64().unwrap();
    assert!((p - (1.0 - (-1.0f64).exp())).abs() < 5e-3);
}

#[test]
fn curve_endpoints_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"system": {"delta": 1.0}, "decoherence": {"kind": "lindblad", "gamma": 0.0},
            "curve": {"delta2_over_v": [0.1, 3.0]}}"#,
    );
    let out = dir.path().join("a.csv");
    let o = lzsweep(&[
        "curve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config={"));
    assert_eq!(lines.next().unwrap(), "v,delta2_over_v,p_success,std_err,n");
    let p: Vec<f64> = lines
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!((p[0] - 0.145).abs() < 2e-3);
    assert!((p[1] - 0.991).abs() < 2e-3);

    // feeding the output back as the config reproduces it byte for byte
    let again = dir.path().join("b.csv");
    let o = lzsweep(&[
        "curve",
        "--config",
        out.to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"system": {"delta": 1.0, "v": 1.0},
            "decoherence": {"kind": "classical", "model": "telegraph", "amplitude": 0.5, "tau": 0.5},
            "ensemble": {"n_trajectories": 20, "master_seed": 1}}"#,
    );
    let run = |seed: &str| {
        let o = lzsweep(&[
            "ensemble",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        serde_json::from_slice::<serde_json::Value>(&o.stdout).unwrap()
    };
    let (a, b) = (run("1"), run("2"));
    assert_eq!(a["config"]["ensemble"]["master_seed"], 1);
    assert_eq!(b["config"]["ensemble"]["master_seed"], 2);
    assert_ne!(
        a["result"]["success_probability"],
        b["result"]["success_probability"]
    );
}

#[test]
fn scaling_table_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"system": {"delta": 1.0},
            "scaling": {"tau": 10.0, "per_qubit_amplitude": 1.0, "m_values": [1, 16, 64], "margin": 1.0}}"#,
    );
    let o = lzsweep(&["scaling", "--config", cfg.to_str().unwrap()]);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("16,4.0000000000000000e0,1.97028"));
}
