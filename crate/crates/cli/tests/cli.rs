use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qlab_cli::{RunManifest, MANIFEST_NAME, OUT_DIR_ENV};

fn qlab(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qlab"));
    cmd.args(args).env_remove(OUT_DIR_ENV);
    if let Some(dir) = env_out {
        cmd.env(OUT_DIR_ENV, dir);
    }
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn bell_by_id_with_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bell");
    let o = qlab(
        &[
            "run",
            "bell",
            "--angles",
            "0,45,22.5,67.5",
            "--model",
            "qm",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(out.join("chsh.json")).unwrap()).unwrap();
    let s = json["s_value"].as_f64().unwrap();
    assert!((s - 2.8284).abs() < 1e-4, "{s}");
    let manifest = RunManifest::read(&out).unwrap();
    assert!(manifest.verify(&out).is_empty());
    assert_eq!(manifest.files.len(), 2);
}

#[test]
fn three_polarizer_sweep_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("tp");
    let o = qlab(
        &[
            "run",
            "three_polarizer",
            "--alpha-sweep",
            "0:180:5",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("three_polarizer.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 37);
    for row in rows {
        let p: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!(p <= 1e-9, "{row}");
    }
}

#[test]
fn malformed_config_exits_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let cfg = write(tmp.path(), "bad.json", "{\"experiment\": \"evolve\", ");
    let o = qlab(&["run", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr(&o).lines().count(), 1, "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn missing_config_file_is_a_parse_error() {
    let o = qlab(&["run", "/nonexistent/config.json"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_config_exits_3_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"experiment": "evolve", "params": {"dt": -0.1}}"#,
    );
    let o = qlab(&["run", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("params.dt"), "{err}");
    assert!(!out.exists());
}

#[test]
fn numerical_failure_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    // Centred between grid points, a packet this narrow underflows to zero
    // everywhere and cannot be normalized.
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"experiment": "evolve", "params": {"packet": {"center": 0.025, "sigma": 1e-5, "k0": 0}}}"#,
    );
    let o = qlab(&["run", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert_eq!(stderr(&o).lines().count(), 1);
    assert!(!out.exists());
}

#[test]
fn validate_reports_each_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write(tmp.path(), "good.json", r#"{"experiment": "eigen"}"#);
    let o = qlab(&["validate", &good], None);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "ok");

    let bad = write(
        tmp.path(),
        "bad.json",
        r#"{"experiment": "eigen", "params": {"n_states": 0,
            "system": {"grid": {"x_min": -1, "x_max": 1, "n_points": 4}}}}"#,
    );
    let o = qlab(&["validate", &bad], None);
    assert_eq!(o.status.code(), Some(3));
    let report = String::from_utf8_lossy(&o.stdout).into_owned();
    assert_eq!(report.lines().count(), 2, "{report}");
    assert!(report.contains("params.system.grid") && report.contains("params.n_states"));
}

#[test]
fn environment_supplies_default_out_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qlab(&["run", "three_polarizer", "--alpha-sweep", "0:10:5"], Some(tmp.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join(MANIFEST_NAME).exists());
}

#[test]
fn config_out_dir_beats_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let target = tmp.path().join("from_config");
    let cfg = write(
        tmp.path(),
        "c.json",
        &format!(
            r#"{{"experiment": "three_polarizer", "params": {{"alpha_sweep": [0, 10, 5]}}, "output_dir": {:?}}}"#,
            target.to_str().unwrap()
        ),
    );
    let env_dir = tmp.path().join("from_env");
    let o = qlab(&["run", &cfg], Some(&env_dir));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(target.join(MANIFEST_NAME).exists());
    assert!(!env_dir.exists());
}

#[test]
fn flags_for_another_experiment_are_rejected() {
    let o = qlab(&["run", "eigen", "--angles", "0,1,2,3"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn list_experiments_names_all_ids() {
    let o = qlab(&["list-experiments"], None);
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    for id in [
        "evolve",
        "eigen",
        "madelung",
        "classical_compare",
        "three_polarizer",
        "bell",
    ] {
        assert!(text.lines().any(|l| l.starts_with(id)), "{id}");
    }
}

#[test]
fn every_experiment_runs_and_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    for id in qlab_cli::ExperimentId::ALL {
        let out = tmp.path().join(id.name());
        let o = qlab(&["run", id.name(), "--out", out.to_str().unwrap()], None);
        assert!(o.status.success(), "{id}: {}", stderr(&o));
        let manifest = RunManifest::read(&out).unwrap();
        assert!(manifest.verify(&out).is_empty(), "{id}");
        assert_eq!(manifest.config["experiment"], id.name());
    }
}

#[test]
fn tampered_file_fails_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("tp");
    let o = qlab(&["run", "three_polarizer", "--out", out.to_str().unwrap()], None);
    assert!(o.status.success());
    fs::write(out.join("three_polarizer.csv"), "alpha_deg\n").unwrap();
    let manifest = RunManifest::read(&out).unwrap();
    assert_eq!(manifest.verify(&out), vec!["three_polarizer.csv".to_owned()]);
}
