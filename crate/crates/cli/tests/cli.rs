use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qftnmr(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qftnmr")).args(args).arg("--out").arg(out).env_remove("QFTNMR_MOLECULE").output().unwrap()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn experiment_1_writes_summary_and_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = qftnmr(&["run", "--experiment", "1", "--r", "2", "--linewidth", "2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = summary(dir.path());
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["k"], 4);
    assert_eq!(v["r_inferred"], 2);
    assert!((v["correlation"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    for f in ["tomogram.json", "spectrum_spin1.csv", "spectrum_spin3.csv", "lineshape_spin2.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert!(!dir.path().join("failure.json").exists());
    let csv = fs::read_to_string(dir.path().join("spectrum_spin1.csv")).unwrap();
    assert!(csv.starts_with("frequency_hz,amplitude,assignment\n"));
}

#[test]
fn compiled_qft_program_gives_the_same_reading() {
    let dir = tempfile::tempdir().unwrap();
    let out = qftnmr(&["run", "--experiment", "1", "--r", "4", "--qft-program", "compiled"], dir.path());
    assert!(out.status.success());
    assert_eq!(summary(dir.path())["r_inferred"], 4);
}

#[test]
fn uniform_input_gives_a_single_line() {
    let dir = tempfile::tempdir().unwrap();
    assert!(qftnmr(&["run", "--experiment", "1", "--r", "1"], dir.path()).status.success());
    let v = summary(dir.path());
    assert_eq!(v["support"], serde_json::json!(["000"]));
    assert_eq!(v["r_inferred"], 1);
}

#[test]
fn failed_invariant_writes_failure_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = qftnmr(&["run", "--experiment", "1", "--original-sequence"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let f: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("failure.json")).unwrap()).unwrap();
    assert_eq!(f["failed"][0]["name"], "preparation_residual");

    // A later passing run in the same directory clears it.
    assert!(qftnmr(&["run", "--experiment", "1"], dir.path()).status.success());
    assert!(!dir.path().join("failure.json").exists());
}

#[test]
fn experiment_2_observer_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let out = qftnmr(&["run", "--experiment", "observer-spectral", "--r", "2", "--x0", "1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = summary(dir.path());
    assert_eq!(v["decoded_states"], serde_json::json!(["000", "100"]));
    assert_eq!(v["r_inferred"], 2);
    let csv = fs::read_to_string(dir.path().join("spectrum_observer.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
}

#[test]
fn diagonal_gradient_keeps_the_readings() {
    let dir = tempfile::tempdir().unwrap();
    let out = qftnmr(&["run", "--experiment", "2", "--r", "4", "--diagonal-gradient"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(summary(dir.path())["r_inferred"], 4);
}

#[test]
fn strict_delays_spoil_the_preparation() {
    // Every coupling evolves during every delay, so the preparations lose
    // their target and the run reports it.
    for exp in ["1", "2"] {
        let dir = tempfile::tempdir().unwrap();
        let out = qftnmr(&["run", "--experiment", exp, "--strict-delays"], dir.path());
        assert_eq!(out.status.code(), Some(1));
        let v = summary(dir.path());
        assert_eq!(v["modes"]["strict_delays"], true);
        assert!(v["preparation"]["relative_residual"].as_f64().unwrap() > 1e-6);
        assert!(dir.path().join("failure.json").exists());
    }
}

#[test]
fn period_finding_from_generator_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = qftnmr(&["run", "--experiment", "period", "--n", "3", "--r", "2", "--shots", "20", "--seed", "1"], dir.path());
    assert!(out.status.success());
    assert_eq!(summary(dir.path())["estimate"]["r_hat"], 2);

    let table = dir.path().join("f.csv");
    fs::write(&table, "x,f(x)\n0,5\n1,5\n2,5\n3,5\n").unwrap();
    let out = qftnmr(&["run", "--experiment", "period", "--function-table", table.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = summary(dir.path());
    assert_eq!(v["estimate"]["r_hat"], 1);
    assert_eq!(v["estimate"]["ambiguous"], true);

    fs::write(&table, "0,1\n1,oops\n").unwrap();
    let out = qftnmr(&["run", "--experiment", "period", "--function-table", table.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn molecule_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mol.json");
    let mut doc: serde_json::Value = serde_json::from_str(include_str!("../../core/data/alanine.json")).unwrap();
    doc["name"] = "renamed".into();
    fs::write(&path, doc.to_string()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qftnmr"))
        .args(["run", "--experiment", "2", "--baseline", "--out"])
        .arg(dir.path())
        .env("QFTNMR_MOLECULE", &path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(summary(dir.path())["molecule"], "renamed");

    fs::write(&path, "{").unwrap();
    let out =
        Command::new(env!("CARGO_BIN_EXE_qftnmr")).args(["run", "--out"]).arg(dir.path()).env("QFTNMR_MOLECULE", &path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_period_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = qftnmr(&["run", "--experiment", "1", "--r", "3"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("must divide"));
}

#[test]
fn compile_then_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let prog = dir.path().join("qft.pulse");
    let bin = env!("CARGO_BIN_EXE_qftnmr");
    let out = Command::new(bin).args(["compile", "--out"]).arg(&prog).output().unwrap();
    assert!(out.status.success());
    let out = Command::new(bin).args(["verify", "--program"]).arg(&prog).output().unwrap();
    assert!(out.status.success());
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["pass"], true);

    fs::write(&prog, "spins(3) X_1(pi/2)").unwrap();
    let out = Command::new(bin).args(["verify", "--program"]).arg(&prog).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let circuit = dir.path().join("c.txt");
    fs::write(&circuit, "qubits 2\nH 1\nCR 2 1 d=1\nH 2\nSWAP 1 2\n").unwrap();
    let out = Command::new(bin).args(["compile", "--circuit"]).arg(&circuit).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("J_"));
}
