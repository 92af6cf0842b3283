//! Command-line surface checks: exit codes, validation messages, and the
//! self-describing round trip of a run directory.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_caginalp"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn stationary_simulate_reports_zero_phase() {
    let out = tmp("stationary");
    let status = bin()
        .args(["simulate"])
        .arg(configs().join("stationary.json"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["scalars"]["max_abs_phi"], 0.0);
    assert_eq!(summary["all_checks_passed"], true);
}

#[test]
fn missing_field_exits_one_and_names_it() {
    let out = tmp("missing-field");
    let cfg = out.join("bad.json");
    std::fs::create_dir_all(&out).unwrap();
    let text = std::fs::read_to_string(configs().join("stationary.json")).unwrap();
    let stripped = text.replace(", \"theta_c\": 1.0", "");
    assert_ne!(stripped, text, "fixture edit must remove theta_c");
    std::fs::write(&cfg, stripped).unwrap();
    let output = bin()
        .args(["simulate"])
        .arg(&cfg)
        .arg("--out")
        .arg(out.join("run"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("theta_c"), "stderr: {stderr}");
}

#[test]
fn initial_phase_on_the_obstacle_is_rejected() {
    let out = tmp("bad-phi0");
    let cfg = out.join("bad.json");
    std::fs::create_dir_all(&out).unwrap();
    let text = std::fs::read_to_string(configs().join("stationary.json")).unwrap();
    std::fs::write(&cfg, text.replace("\"phi0\": \"0\"", "\"phi0\": \"1.0\"")).unwrap();
    let output = bin()
        .args(["simulate"])
        .arg(&cfg)
        .arg("--out")
        .arg(out.join("run"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("-1 < phi0 < 1"), "stderr: {stderr}");
}

#[test]
fn terminal_temperature_weight_needs_its_target() {
    let out = tmp("k6-target");
    let cfg = out.join("bad.json");
    std::fs::create_dir_all(&out).unwrap();
    let text = std::fs::read_to_string(configs().join("tracking_1d.json")).unwrap();
    std::fs::write(
        &cfg,
        text.replace("      \"wp_omega\": \"0.5*cos(pi*x)\"\n", "")
            .replace("\"w_omega\": \"x\",", "\"w_omega\": \"x\""),
    )
    .unwrap();
    let output = bin()
        .args(["adjoint"])
        .arg(&cfg)
        .arg("--out")
        .arg(out.join("run"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("wp_omega"), "stderr: {stderr}");
}

#[test]
fn unknown_command_exits_one() {
    let output = bin().args(["frobnicate", "x.json"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn adjoint_requires_a_logarithmic_potential() {
    let out = tmp("adjoint-obstacle");
    let cfg = out.join("obstacle.json");
    std::fs::create_dir_all(&out).unwrap();
    let text = std::fs::read_to_string(configs().join("tracking_1d.json")).unwrap();
    std::fs::write(
        &cfg,
        text.replace(
            "\"kind\": \"logarithmic\", \"gamma\": 0.1,",
            "\"kind\": \"obstacle\",",
        ),
    )
    .unwrap();
    let output = bin()
        .args(["adjoint"])
        .arg(&cfg)
        .arg("--out")
        .arg(out.join("run"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("logarithmic"), "stderr: {stderr}");
}

#[test]
fn failed_invariant_check_exits_three() {
    // an unreachable Taylor-order requirement makes the check fail while the
    // run itself succeeds
    let out = tmp("exit-three");
    let cfg = out.join("strict.json");
    std::fs::create_dir_all(&out).unwrap();
    let text = std::fs::read_to_string(configs().join("tracking_1d.json")).unwrap();
    std::fs::write(&cfg, text.replace("\"min_order\": 1.9", "\"min_order\": 2.5")).unwrap();
    let output = bin()
        .args(["gradient-check"])
        .arg(&cfg)
        .arg("--out")
        .arg(out.join("run"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out.join("run").join("summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["all_checks_passed"], false);
}

#[test]
fn solver_failure_exits_two() {
    // an oversized time step violates the adjoint positivity bound; the
    // forward barrier solve cannot balance the resulting drift either, so the
    // run dies with a solver failure
    let out = tmp("solver-fail");
    let cfg = out.join("stiff.json");
    std::fs::create_dir_all(&out).unwrap();
    let text = std::fs::read_to_string(configs().join("tracking_1d.json")).unwrap();
    let stiff = text
        .replace("\"f2_coefficient\": 0.25", "\"f2_coefficient\": 50.0")
        .replace("\"horizon\": 0.5, \"steps\": 200", "\"horizon\": 1.0, \"steps\": 10");
    std::fs::write(&cfg, stiff).unwrap();
    let output = bin()
        .args(["adjoint"])
        .arg(&cfg)
        .arg("--out")
        .arg(out.join("run"))
        .output()
        .unwrap();
    assert_eq!(
        output.status.code(),
        Some(2),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn run_directory_is_self_describing() {
    // re-running from the config copy written into the run directory must
    // reproduce the summary scalars exactly
    let out1 = tmp("selfdesc-1");
    let out2 = tmp("selfdesc-2");
    for (cfg, out) in [
        (configs().join("tracking_1d.json"), &out1),
        (out1.join("config.json"), &out2),
    ] {
        let status = bin()
            .args(["simulate"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .args(["--threads", "1"])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let s1: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("summary.json")).unwrap()).unwrap();
    let s2: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out2.join("summary.json")).unwrap()).unwrap();
    for key in ["max_abs_phi", "phi_linf_l2", "w_linf_h1", "cost"] {
        let a = s1["scalars"][key].as_f64().unwrap();
        let b = s2["scalars"][key].as_f64().unwrap();
        assert!(
            (a - b).abs() <= 1e-12 * a.abs().max(1.0),
            "{key}: {a} vs {b}"
        );
    }
}

#[test]
fn quench_sweep_thread_count_does_not_change_results() {
    let out1 = tmp("threads-1");
    let out4 = tmp("threads-4");
    for (threads, out) in [("1", &out1), ("4", &out4)] {
        let status = bin()
            .args(["quench-sweep"])
            .arg(configs().join("quench_interior.json"))
            .arg("--out")
            .arg(out)
            .args(["--threads", threads])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(out1.join("rates.csv")).unwrap();
    let b = std::fs::read(out4.join("rates.csv")).unwrap();
    assert_eq!(a, b, "rates.csv must not depend on the thread count");
}
