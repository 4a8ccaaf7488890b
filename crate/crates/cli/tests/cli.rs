use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn demo(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_constructa")).args(args).arg("--out").arg(out).output().unwrap()
}

fn run_demo(command: &str, config: &str, out: &Path, extra: &[&str]) -> Output {
    let cfg = demo(config);
    let mut args = vec![command, "--config", cfg.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args, out)
}

fn certificate(out: &Path, command: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join(format!("{command}.json"))).unwrap()).unwrap()
}

#[test]
fn demo_exit_codes() {
    let cases = [
        ("eig", "eig_damped.toml", 0),
        ("eig", "eig_rotation.toml", 2),
        ("evt-min", "evt_point.toml", 0),
        ("danskin", "danskin_tent.toml", 0),
        ("selector", "selector_two_chunk.toml", 0),
        ("ode", "ode_decay.toml", 0),
        ("ode", "ode_tent.toml", 0),
        ("shh", "shh_integrator.toml", 0),
        ("certify", "certify_decay.toml", 0),
        ("certify", "certify_growth.toml", 1),
    ];
    for (command, config, code) in cases {
        let dir = tempfile::tempdir().unwrap();
        let out = run_demo(command, config, dir.path(), &[]);
        assert_eq!(out.status.code(), Some(code), "{command} {config}: {}", String::from_utf8_lossy(&out.stderr));
        let cert = certificate(dir.path(), command);
        assert_eq!(cert["exit_code"], code);
        assert_eq!(cert["command"], command);
        for file in cert["outputs"].as_array().unwrap() {
            assert!(dir.path().join(file.as_str().unwrap()).exists(), "{command}: missing {file}");
        }
    }
}

#[test]
fn unknown_form_lists_registry() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_demo("certify", "malformed.toml", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(64));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("cubic"), "{err}");
    for kind in ["constant", "polynomial", "piecewise_linear", "compose"] {
        assert!(err.contains(kind), "{kind} missing from: {err}");
    }
}

#[test]
fn missing_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["eig"], dir.path()).status.code(), Some(64));
    assert_eq!(run(&["eig", "--config", "/nonexistent.toml"], dir.path()).status.code(), Some(64));
}

#[test]
fn seed_flag_overrides_config_and_changes_digest() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_demo("selector", "selector_two_chunk.toml", a.path(), &["--seed", "1"]);
    run_demo("selector", "selector_two_chunk.toml", b.path(), &["--seed", "2"]);
    let (ca, cb) = (certificate(a.path(), "selector"), certificate(b.path(), "selector"));
    assert_eq!(ca["seed"], 1);
    assert_eq!(cb["seed"], 2);
    assert_ne!(ca["inputs_digest"], cb["inputs_digest"]);
}

#[test]
fn repeated_runs_match_outside_wall_clock() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = run_demo("shh", "shh_integrator.toml", dir.path(), &["--seed", "5"]);
        assert!(out.status.success());
    }
    let strip = |dir: &Path| {
        let mut v = certificate(dir, "shh");
        v.as_object_mut().unwrap().remove("wall_clock_seconds");
        v
    };
    assert_eq!(strip(a.path()), strip(b.path()));
    assert_eq!(
        std::fs::read(a.path().join("shh_trajectory.csv")).unwrap(),
        std::fs::read(b.path().join("shh_trajectory.csv")).unwrap()
    );
}

#[test]
fn precision_audit_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_demo("ode", "ode_decay.toml", dir.path(), &["--precision-audit"]);
    assert!(out.status.success());
    let cert = certificate(dir.path(), "ode");
    assert_eq!(cert["precision_audit"]["consistent"], true);
    assert_eq!(cert["precision_audit"]["eps"], cert["fields"]["eps"].as_f64().unwrap() / 2.0);
}
