//! End-to-end tests of the qkd3 binary: reproducibility, format parity,
//! exit-code contract, and the transcript-driven keyrate path.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qkd3() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qkd3"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run_ok(cmd: &mut Command) -> Output {
    let output = cmd.output().unwrap();
    assert!(
        output.status.success(),
        "command failed: {}\nstderr: {}",
        output.status,
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

const ATTACK_CONFIG: &str = r#"{
  "scenario": "pns_lossy",
  "mean_photon_grid": [1.0, 5.0],
  "transmittance_grid": [0.5, 1.0],
  "trials": 20000,
  "seed": 11
}"#;

#[test]
fn same_config_reproduces_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "attack.json", ATTACK_CONFIG);
    let out1 = dir.path().join("a.csv");
    let out2 = dir.path().join("b.csv");
    for out in [&out1, &out2] {
        run_ok(
            qkd3()
                .args(["attack-sweep", "--config"])
                .arg(&config)
                .arg("--out")
                .arg(out),
        );
    }
    let a = std::fs::read(&out1).unwrap();
    let b = std::fs::read(&out2).unwrap();
    assert_eq!(a, b);
}

#[test]
fn embedded_config_reproduces_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "attack.json", ATTACK_CONFIG);
    let out1 = dir.path().join("a.csv");
    run_ok(
        qkd3()
            .args(["attack-sweep", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out1),
    );
    let text = std::fs::read_to_string(&out1).unwrap();
    let embedded = text
        .lines()
        .find_map(|line| line.strip_prefix("# config: "))
        .expect("config echo line");
    let config2 = write(dir.path(), "echo.json", embedded);
    let out2 = dir.path().join("b.csv");
    run_ok(
        qkd3()
            .args(["attack-sweep", "--config"])
            .arg(&config2)
            .arg("--out")
            .arg(&out2),
    );
    assert_eq!(
        std::fs::read(&out1).unwrap(),
        std::fs::read(&out2).unwrap()
    );
}

#[test]
fn flag_overrides_are_embedded_in_the_echo() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "attack.json", ATTACK_CONFIG);
    let output = run_ok(
        qkd3()
            .args(["attack-sweep", "--seed", "777", "--trials", "5000", "--config"])
            .arg(&config),
    );
    let text = String::from_utf8(output.stdout).unwrap();
    let embedded = text
        .lines()
        .find_map(|line| line.strip_prefix("# config: "))
        .unwrap();
    let value: serde_json::Value = serde_json::from_str(embedded).unwrap();
    assert_eq!(value["seed"], 777);
    assert_eq!(value["trials"], 5000);
}

#[test]
fn csv_and_json_emit_identical_values() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "attack.json", ATTACK_CONFIG);
    let csv_out = run_ok(
        qkd3()
            .args(["attack-sweep", "--format", "csv", "--config"])
            .arg(&config),
    );
    let json_out = run_ok(
        qkd3()
            .args(["attack-sweep", "--format", "json", "--config"])
            .arg(&config),
    );
    let csv = String::from_utf8(csv_out.stdout).unwrap();
    let doc: serde_json::Value =
        serde_json::from_slice(&json_out.stdout).unwrap();
    let rows = doc["rows"].as_array().unwrap();

    let mut lines = csv.lines().skip_while(|l| l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let data: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(data.len(), rows.len());
    for (fields, row) in data.iter().zip(rows) {
        for (name, field) in header.iter().zip(fields) {
            let value = &row[*name];
            match value {
                serde_json::Value::Null => assert!(field.is_empty()),
                serde_json::Value::Number(n) => {
                    let parsed: f64 = field.parse().unwrap();
                    assert_eq!(parsed, n.as_f64().unwrap(), "column {name}");
                }
                serde_json::Value::String(s) => assert_eq!(field, s),
                other => panic!("unexpected cell {other:?}"),
            }
        }
    }
}

#[test]
fn deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "attack.json", ATTACK_CONFIG);
    let single = run_ok(
        qkd3()
            .args(["attack-sweep", "--threads", "1", "--config"])
            .arg(&config),
    );
    let many = run_ok(
        qkd3()
            .args(["attack-sweep", "--threads", "8", "--config"])
            .arg(&config),
    );
    assert_eq!(single.stdout, many.stdout);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "bad.json",
        r#"{"scenario": "ir_lossy", "seed": 1, "bogus_key": 3}"#,
    );
    let output = qkd3()
        .args(["attack-sweep", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("bogus_key"), "stderr: {stderr}");
}

#[test]
fn invalid_scenario_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "bad.json",
        r#"{"scenario": "quantum_bogon", "seed": 1}"#,
    );
    let output = qkd3()
        .args(["attack-sweep", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(!output.status.success());
}

#[test]
fn failed_rows_set_exit_code_and_are_enumerated() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "spec.json", r#"{"x_grid": [1.0, 999.0]}"#);
    let output = qkd3()
        .args(["specfun-table", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("row 1"), "stderr: {stderr}");
    // the good row is still present in the output
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("1,")));
}

#[test]
fn attack_sweep_budget_columns_follow_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "attack.json", ATTACK_CONFIG);
    let output = run_ok(
        qkd3()
            .args(["attack-sweep", "--format", "json", "--config"])
            .arg(&config),
    );
    let doc: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    for row in doc["rows"].as_array().unwrap() {
        let n = row["mean_n"].as_f64().unwrap();
        let t = row["transmittance"].as_f64().unwrap();
        if t < 1.0 {
            assert_eq!(row["n1"].as_f64().unwrap(), (1.0 - t) * n);
            assert_eq!(row["n2"].as_f64().unwrap(), (1.0 - t) * t * n);
            assert_eq!(row["status"], "ok");
        } else {
            // lossless PNS tap has nothing to hide in: marker row
            assert_eq!(row["status"], "degenerate_budget");
            assert!(row["p_hat"].is_null());
        }
    }
}

#[test]
fn auth_sweep_small_n_rows_approach_the_limits() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "auth.json",
        r#"{"mean_photon_grid": [0.01], "transmittance_grid": [0.1], "trials": 60000, "seed": 3}"#,
    );
    let output = run_ok(
        qkd3()
            .args(["auth-sweep", "--format", "json", "--config"])
            .arg(&config),
    );
    let doc: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let row = &doc["rows"][0];
    let norm = row["pe_norm_analytic"].as_f64().unwrap();
    let mim = row["pe_mim_mc"].as_f64().unwrap();
    assert!((norm - 0.1817).abs() < 1e-3, "norm {norm}");
    assert!((mim - 0.5).abs() < 0.01, "mim {mim}");
    // the analytic column is a direct plumbing of the closed form
    let direct = qkd3_core::specfun::pe_auth_norm_analytic(0.1, 0.01).unwrap();
    assert!((norm - direct).abs() < 1e-12);
}

#[test]
fn protocol_sim_clean_session_infers_no_mim() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "sim.json",
        r#"{
            "session": {
                "mean_n": 4.0, "transmittance": 0.5, "n_pulses": 100000,
                "p_auth_bob": 0.2, "seed": 31337
            },
            "trials": 100000
        }"#,
    );
    let output = run_ok(
        qkd3()
            .args(["protocol-sim", "--format", "json", "--config"])
            .arg(&config),
    );
    let doc: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let row = &doc["rows"][0];
    assert_eq!(row["qber"].as_f64().unwrap(), 0.0);
    let f = row["inferred_mim_fraction"].as_f64().unwrap();
    assert!(f < 0.05, "clean session inferred f = {f}");
    assert!(row["key_rate"].as_f64().unwrap() > 0.0);
}

#[test]
fn keyrate_sign_flips_exactly_at_the_threshold_column() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "keyrate.json",
        r#"{
            "mean_photon_grid": [2.0],
            "transmittance_grid": [0.5],
            "qber_grid": [0.0, 0.02, 0.05, 0.08, 0.2],
            "mim_fraction": 0.25,
            "trials": 50000,
            "seed": 9
        }"#,
    );
    let output = run_ok(
        qkd3()
            .args(["keyrate", "--format", "json", "--config"])
            .arg(&config),
    );
    let doc: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    for row in doc["rows"].as_array().unwrap() {
        let k = row["key_rate"].as_f64().unwrap();
        let q = row["qber"].as_f64().unwrap();
        let threshold = row["qber_threshold"].as_f64().unwrap();
        assert_eq!(k > 0.0, q < threshold, "q={q} thr={threshold} k={k}");
        // Q = 0, f = 0 sanity is covered by the checked formula: here f = 0.25
        assert_eq!(row["status"], "ok");
    }
}

#[test]
fn transcript_driven_keyrate_detects_full_mim() {
    let dir = tempfile::tempdir().unwrap();
    let sim_config = write(
        dir.path(),
        "sim.json",
        r#"{
            "session": {
                "mean_n": 1.0,
                "transmittance": 0.25,
                "n_pulses": 200000,
                "p_auth_bob": 0.3,
                "seed": 424242
            },
            "attack": {"kind": "man_in_the_middle"},
            "trials": 100000
        }"#,
    );
    let transcript = dir.path().join("transcript.json");
    run_ok(
        qkd3()
            .args(["protocol-sim", "--config"])
            .arg(&sim_config)
            .arg("--transcript-out")
            .arg(&transcript),
    );
    // summary-only transcript: no pulses key
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&transcript).unwrap()).unwrap();
    assert!(doc.get("pulses").is_none());

    let keyrate_config = write(
        dir.path(),
        "keyrate.json",
        &format!(
            r#"{{"transcript": "{}", "trials": 100000, "seed": 5}}"#,
            transcript.display()
        ),
    );
    let output = run_ok(
        qkd3()
            .args(["keyrate", "--format", "json", "--config"])
            .arg(&keyrate_config),
    );
    let doc: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let row = &doc["rows"][0];
    let f = row["mim_fraction"].as_f64().unwrap();
    assert!(f > 0.9, "inferred MIM fraction {f}");
}

#[test]
fn protocol_sim_summary_is_deterministic_and_pulses_flag_works() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "sim.json",
        r#"{"session": {"mean_n": 2.0, "transmittance": 0.5, "n_pulses": 2000, "seed": 7}}"#,
    );
    let a = run_ok(qkd3().args(["protocol-sim", "--config"]).arg(&config));
    let b = run_ok(qkd3().args(["protocol-sim", "--config"]).arg(&config));
    assert_eq!(a.stdout, b.stdout);

    let transcript = dir.path().join("full.json");
    run_ok(
        qkd3()
            .args(["protocol-sim", "--include-pulses", "--config"])
            .arg(&config)
            .arg("--transcript-out")
            .arg(&transcript),
    );
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&transcript).unwrap()).unwrap();
    assert_eq!(doc["pulses"].as_array().unwrap().len(), 2000);
}

#[test]
fn efficiency_command_reports_the_crossing_distance() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "eff.json",
        r#"{"mean_photon_grid": [3.0], "length_km_grid": [0.0, 19.0, 20.0]}"#,
    );
    let output = run_ok(
        qkd3()
            .args(["efficiency", "--format", "json", "--config"])
            .arg(&config),
    );
    let doc: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    // advantage distance 19.4538 km: E > 1 at 19 km, E < 1 at 20 km
    assert!((rows[0]["efficiency"].as_f64().unwrap() - 2.414_960_542_893_017).abs() < 1e-12);
    assert!(rows[1]["efficiency"].as_f64().unwrap() > 1.0);
    assert!(rows[2]["efficiency"].as_f64().unwrap() < 1.0);
    for row in rows {
        let adv = row["advantage_distance_km"].as_f64().unwrap();
        assert!((adv - 19.453_781_259_591_09).abs() < 1e-9);
    }
}
