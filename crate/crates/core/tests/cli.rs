mod common;

use common::{config, determinism_failures, read_dir, run_cli};

fn stderr_json(out: &std::process::Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("error report on stderr");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("{e}: {text}"))
}

#[test]
fn every_subcommand_is_deterministic() {
    let bad = determinism_failures();
    assert!(bad.is_empty(), "{bad:?}");
}

#[test]
fn equilibria_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_cli(
        &["equilibria", "--config", config("paper.json").to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success());
    let files = read_dir(dir.path());
    let v: serde_json::Value = serde_json::from_slice(&files["equilibria.json"]).unwrap();
    assert_eq!(v["status"], "ok");
    let v_d = v["planar"][0]["state"]["V_d"].as_f64().unwrap();
    assert!((v_d - 391.91597560421286).abs() < 1e-9);
}

#[test]
fn overload_reports_no_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_cli(&["equilibria", "--p-pev", "1e7"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&read_dir(dir.path())["equilibria.json"]).unwrap();
    assert_eq!(v["status"], "none");
}

#[test]
fn invalid_input_exits_2_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run_cli(&["equilibria", "--p-pev", "-5"], &out_dir);
    assert_eq!(out.status.code(), Some(2));
    let v = stderr_json(&out);
    assert_eq!(v["error"], "invalid_input");
    assert_eq!(v["exit_code"], 2);
    assert!(!out_dir.exists());
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"input": {"E_d": 392.125, "P_pev": 19200, "bogus": 1}}"#).unwrap();
    let out_dir = dir.path().join("out");
    let out = run_cli(&["pv-curve", "--config", cfg.to_str().unwrap()], &out_dir);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "invalid_input");
    assert!(!out_dir.exists());
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    // beyond the Hopf point there is no unstable cycle to trace
    let out = run_cli(&["roa", "--p-pev", "30000"], &out_dir);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "numerical_failure");
    assert!(!out_dir.exists());
}

#[test]
fn cct_methods_agree_on_the_surge_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let surge = config("scenario_surge.json");
    let out = run_cli(&["cct", "--scenario", surge.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let files = read_dir(dir.path());
    let v: serde_json::Value = serde_json::from_slice(&files["cct.json"]).unwrap();
    assert_eq!(v["agreement"]["agree"], true);
    for name in [
        "witness_converged_bisection.csv",
        "witness_diverged_bisection.csv",
        "witness_converged_roa.csv",
        "witness_diverged_roa.csv",
    ] {
        assert!(files.contains_key(name), "{name}");
    }
}
