use std::path::PathBuf;
use std::process::{Command, Output};

fn funnelctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_funnelctl")).args(args).output().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("funnelctl-test-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn list_names_the_catalog() {
    let o = funnelctl(&["list"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().count() >= 10);
    assert!(text.contains("scalar_disturbance") && text.contains("icfc"));
}

#[test]
fn run_writes_csv_and_report() {
    let d = scratch("run");
    let (csv, rep) = (d.join("a.csv"), d.join("a.json"));
    let o = funnelctl(&[
        "run",
        "--scenario",
        "scalar_disturbance",
        "--out",
        csv.to_str().unwrap(),
        "--report",
        rep.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let head = std::fs::read_to_string(&csv).unwrap();
    assert!(head.starts_with("t,y_1,u_1,e_1"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(report["termination"], "Completed");
}

#[test]
fn check_prints_feasibility() {
    let o = funnelctl(&["check", "--scenario", "saturated"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("feasibility:"));
}

#[test]
fn bad_inputs_exit_with_documented_codes() {
    let d = scratch("bad");
    // e(0) = 1.2 outside the unit funnel
    let bad_ic = d.join("bad_ic.json");
    std::fs::write(
        &bad_ic,
        r#"{"system": {"kind": "scalar", "a": 1, "b": 1, "c": 1, "x0": 1.2},
            "controller": {"variant": "funnel_rd1", "phi": {"family": "constant_reciprocal", "c": 1}},
            "reference": {"kind": "zero", "dim": 1}, "sim": {"t_end": 1}}"#,
    )
    .unwrap();
    let o = funnelctl(&["run", "--config", bad_ic.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("phi(0)|e(0)| < 1"));

    let fast = d.join("fast.json");
    std::fs::write(
        &fast,
        r#"{"system": {"kind": "scalar", "a": 1, "b": 1, "c": 1, "x0": 0},
            "controller": {"variant": "funnel_rd1",
                           "phi": {"family": "custom", "expr": {"kind": "exp_polynomial", "coeffs": [0, 0, 1]}}},
            "reference": {"kind": "zero", "dim": 1}, "sim": {"t_end": 1}}"#,
    )
    .unwrap();
    let o = funnelctl(&["check", "--config", fast.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("undecidable"));

    let unknown = d.join("unknown.json");
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&bad_ic).unwrap()).unwrap();
    v["sim"]["tolerance"] = 1e-3.into();
    std::fs::write(&unknown, v.to_string()).unwrap();
    let o = funnelctl(&["check", "--config", unknown.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field"));

    let missing = d.join("nope.json");
    assert_eq!(funnelctl(&["run", "--config", missing.to_str().unwrap()]).status.code(), Some(5));
    assert_eq!(funnelctl(&["run", "--scenario", "no_such_thing"]).status.code(), Some(3));
}

#[test]
fn scenario_dir_overrides_catalog() {
    let d = scratch("override");
    std::fs::write(
        d.join("scalar_disturbance.json"),
        r#"{"name": "scalar_disturbance",
            "system": {"kind": "scalar", "a": 1, "b": 1, "c": 1, "x0": 5},
            "controller": {"variant": "funnel_rd1", "phi": {"family": "constant_reciprocal", "c": 1}},
            "reference": {"kind": "zero", "dim": 1}, "sim": {"t_end": 1}}"#,
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_funnelctl"))
        .args(["run", "--scenario", "scalar_disturbance"])
        .env("FUNNELCTL_SCENARIO_DIR", &d)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("phi(0)|e(0)| < 1"));
}
