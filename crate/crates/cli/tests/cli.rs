use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_majorana-jm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_json(dir: &Path, name: &str, value: &Value) {
    std::fs::write(dir.join(name), serde_json::to_string(value).unwrap()).unwrap();
}

/// Basis state `|b>` on three modes.
fn basis_state(dir: &Path, b: usize) {
    let mut amps = vec![json!([0.0, 0.0]); 8];
    amps[b] = json!([1.0, 0.0]);
    write_json(dir, "state.json", &json!({"n_modes": 3, "amplitudes": amps}));
}

fn setup() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["construct", "--n", "3", "--k", "1", "--out", "ens"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir
}

#[test]
fn construct_writes_the_archive() {
    let dir = setup();
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("ens/metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["N"], 2);
    assert_eq!(meta["pi"], "(1)(2,3)(4,5)(6)");
    let coverage = std::fs::read_to_string(dir.path().join("ens/coverage.csv")).unwrap();
    assert_eq!(coverage.lines().count(), 16);
    assert!(dir.path().join("ens/matrix_2.txt").exists());
}

#[test]
fn randomized_construction_covers_all_degree4_observables() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["construct", "--n", "6", "--k", "2", "--count", "9", "--seed", "7", "--out", "ens"],
    );
    assert_eq!(code(&out), 0);
    let coverage = std::fs::read_to_string(dir.path().join("ens/coverage.csv")).unwrap();
    assert_eq!(coverage.lines().count(), 496);
    let validate = run(dir.path(), &["validate", "--ensemble", "ens"]);
    assert_eq!(code(&validate), 0);
    let report: Value = serde_json::from_slice(&validate.stdout).unwrap();
    assert_eq!(report["observables"], 495);
    assert_eq!(report["parents_checked"], false);
}

#[test]
fn invalid_degree_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["construct", "--n", "3", "--k", "2", "--seed", "1", "--out", "ens"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds"));
}

#[test]
fn missing_files_exit_2_and_bad_flags_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["validate", "--ensemble", "missing"])), 2);
    assert_eq!(code(&run(dir.path(), &["robustness", "--n", "two", "--k", "2"])), 4);
    assert_eq!(code(&run(dir.path(), &["compare", "--config", "missing.json"])), 2);
}

#[test]
fn validate_reports_dense_checks() {
    let dir = setup();
    let out = run(dir.path(), &["validate", "--ensemble", "ens"]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["min_eta"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    for m in report["matrices"].as_array().unwrap() {
        assert!(m["min_eigenvalue"].as_f64().unwrap() >= -1e-10);
        assert!(m["marginal_residual"].as_f64().unwrap() <= 1e-10);
    }
}

#[test]
fn sharpness_table_has_all_observables() {
    let dir = setup();
    let out = run(dir.path(), &["sharpness", "--ensemble", "ens"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("S,r,R,eta_RS,eta_S,eta_effective\n"));
    assert_eq!(text.lines().count(), 16);
}

#[test]
fn robustness_reports() {
    let dir = tempfile::tempdir().unwrap();
    let exact: Value = serde_json::from_slice(&run(dir.path(), &["robustness", "--n", "2", "--k", "2"]).stdout).unwrap();
    assert!((exact["value"].as_f64().unwrap() - 0.5773503).abs() < 1e-7);
    assert_eq!(exact["status"], "exact");
    let degree1: Value = serde_json::from_slice(&run(dir.path(), &["robustness", "--n", "2", "--k", "1"]).stdout).unwrap();
    assert!((degree1["value"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let out = run(dir.path(), &["robustness", "--n", "5", "--k", "2"]);
    assert_eq!(code(&out), 0);
    let bounded: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(bounded["status"], "budget-exceeded");
    assert!(bounded["value"].is_null());
    assert!(bounded["bounds"]["thm2_upper"].as_f64().is_some());
    assert!(bounded["bounds"]["shadow_lower"].as_f64().is_some());
}

#[test]
fn estimate_basis_energy_within_four_sigma() {
    let dir = setup();
    basis_state(dir.path(), 0b101);
    write_json(
        dir.path(),
        "h.json",
        &json!({"n_modes": 3, "terms": [
            {"S": [1, 2], "alpha": 0.5}, {"S": [3, 4], "alpha": -1.0}, {"S": [5, 6], "alpha": 2.0}
        ]}),
    );
    let out = run(
        dir.path(),
        &[
            "estimate", "--state", "state.json", "--ensemble", "ens", "--hamiltonian", "h.json", "--shots", "20000",
            "--seed", "3", "--out", "est.json",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("est.json")).unwrap()).unwrap();
    let h = &report["hamiltonian"];
    // Pair monomials are -Z: modes 1 and 3 occupied gives 0.5 + 1 + 2.
    assert_eq!(h["exact"].as_f64().unwrap(), 3.5);
    let z = (h["estimate"].as_f64().unwrap() - 3.5).abs() / h["std_error"].as_f64().unwrap();
    assert!(z < 4.0, "z = {z}");
    let log = std::fs::read_to_string(dir.path().join("est.shots.csv")).unwrap();
    assert!(log.starts_with("shot_id,r,x_bits,q_bits\n"));
    assert_eq!(log.lines().count(), 20001);
}

#[test]
fn exact_mode_needs_no_seed() {
    let dir = setup();
    basis_state(dir.path(), 0);
    let out = run(
        dir.path(),
        &["estimate", "--state", "state.json", "--ensemble", "ens", "--target", "1,2", "--target", "[1,3]", "--shots", "0"],
    );
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["mode"], "exact");
    assert_eq!(report["targets"][0]["estimate"], -1.0);
    assert_eq!(report["targets"][1]["estimate"], 0.0);
}

#[test]
fn uncovered_target_is_listed() {
    let dir = setup();
    basis_state(dir.path(), 0);
    // Keep only the first matrix: it leaves three degree-2 observables uncovered.
    let ens = dir.path().join("ens");
    let mut meta: Value = serde_json::from_str(&std::fs::read_to_string(ens.join("metadata.json")).unwrap()).unwrap();
    meta["N"] = json!(1);
    meta["matrices"] = json!(["matrix_1.txt"]);
    meta["sigma"] = json!(["(1)(2)(3)(4)(5)(6)"]);
    write_json(&ens, "metadata.json", &meta);
    let out = run(
        dir.path(),
        &["estimate", "--state", "state.json", "--ensemble", "ens", "--target", "1,2", "--target", "1,3", "--shots", "0"],
    );
    assert_eq!(code(&out), 5);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("[1,2]") && !err.contains("[1,3]"), "{err}");
}

#[test]
fn mismatched_state_exits_4() {
    let dir = setup();
    let mut amps = vec![json!([0.0, 0.0]); 4];
    amps[0] = json!([1.0, 0.0]);
    write_json(dir.path(), "state.json", &json!({"n_modes": 2, "amplitudes": amps}));
    let out = run(
        dir.path(),
        &["estimate", "--state", "state.json", "--ensemble", "ens", "--shots", "10", "--seed", "1"],
    );
    assert_eq!(code(&out), 4);
}

#[test]
fn compare_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["compare", "--n-min", "2", "--n-max", "12", "--k", "1"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for line in text.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let n = cols[0];
        assert!((cols[5] - 1.0 / (2.0 * n - 1.0).sqrt()).abs() < 1e-15);
        // Effective sharpness, so half the per-matrix value.
        assert!(cols[2] * n.sqrt() > 0.125);
        assert!(cols[2] <= cols[6] + 1e-12);
    }
    let out = run(dir.path(), &["compare", "--n-min", "2", "--n-max", "6", "--k", "2"]);
    for line in String::from_utf8(out.stdout).unwrap().lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let (shadow, ho) = (cols[4].parse::<f64>().unwrap(), cols[5].parse::<f64>().unwrap());
        // Both are 1 for the single top-degree observable at n = k.
        if cols[0] == "2" {
            assert_eq!((shadow, ho), (1.0, 1.0));
        } else {
            assert!(shadow < ho);
        }
    }
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = setup();
    basis_state(dir.path(), 3);
    let args = |out: &'static str, threads: &'static str| {
        vec![
            "estimate", "--state", "state.json", "--ensemble", "ens", "--shots", "5000", "--seed", "11", "--threads",
            threads, "--out", out,
        ]
    };
    assert_eq!(code(&run(dir.path(), &args("a.json", "1"))), 0);
    assert_eq!(code(&run(dir.path(), &args("b.json", "4"))), 0);
    let read = |name: &str| std::fs::read(dir.path().join(name)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    assert_eq!(read("a.shots.csv"), read("b.shots.csv"));

    let c1 = run(dir.path(), &["construct", "--n", "6", "--k", "2", "--seed", "9", "--out", "r1"]);
    let c2 = run(dir.path(), &["construct", "--n", "6", "--k", "2", "--seed", "9", "--out", "r2"]);
    assert_eq!((code(&c1), code(&c2)), (0, 0));
    for f in ["metadata.json", "coverage.csv", "matrix_1.txt"] {
        assert_eq!(read(&format!("r1/{f}")), read(&format!("r2/{f}")));
    }
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    write_json(dir.path(), "cfg.json", &json!({"n": 2, "k": 2, "budget": 100}));
    let out = run(dir.path(), &["robustness", "--config", "cfg.json"]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["value"].as_f64().is_some());
    // An explicit flag overrides the file.
    let out = run(dir.path(), &["robustness", "--config", "cfg.json", "--k", "1"]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["k"], 1);
}
