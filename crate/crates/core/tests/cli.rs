mod common;

use std::fs;
use std::path::{Path, PathBuf};

use common::{path_str, run, simulate_to, stderr};
use throw_inertia::bodies::{mounted_grid, mounted_proof, proof_inertia, GridConfig, PROOF_MASS};
use throw_inertia::dynamics::{NoiseModel, REFERENCE_WHEEL_IMPULSE};
use throw_inertia::estimator::DeviceCalibration;
use throw_inertia::experiment::{Bench, DEVICE_ONLY_IMPULSE};
use throw_inertia::io::{read_json, read_throw, write_json, CalibrationFile, ResultFile, TruthFile};
use throw_inertia::metrics::AccuracyReport;
use throw_inertia::signal::FilterSpec;
use throw_inertia::types::{InertiaTensor, MassProperties};

fn device_truth() -> MassProperties {
    Bench::reference().throw(None, DEVICE_ONLY_IMPULSE, 0).unwrap().assembly.device
}

/// Calibration file holding the exact synthetic device properties.
fn truth_calibration(dir: &Path) -> PathBuf {
    let dev = device_truth();
    let cal = DeviceCalibration::new(dev.mass, dev.cog, dev.inertia, Bench::reference().wheel_inertia).unwrap();
    let path = dir.join("truth_cal.json");
    write_json(&path, &CalibrationFile::new(&cal, FilterSpec::default())).unwrap();
    path
}

fn object_throw(dir: &Path, config: GridConfig, noise: NoiseModel, seed: u64) -> (PathBuf, MassProperties) {
    let bench = Bench::reference();
    let t = bench.object_throws(&mounted_grid(config), 1, seed).unwrap().remove(0);
    let csv = simulate_to(dir, &format!("{}_{seed}", config.label()), &t.config, noise);
    (csv, t.assembly.object.unwrap())
}

fn estimate(csv: &Path, cal: &Path, mass: f64, extra: &[&str]) -> std::process::Output {
    let mass = mass.to_string();
    let mut args = vec![
        "estimate",
        "--throw",
        path_str(csv),
        "--calibration",
        path_str(cal),
        "--object-mass",
        &mass,
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["estimate", "--help"]).status.code(), Some(0));
}

#[test]
fn simulate_writes_expected_rows_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _) = object_throw(dir.path(), GridConfig::E, NoiseModel::experiment(7), 7);
    let rec = read_throw(&csv).unwrap();
    assert_eq!(rec.len(), 4000);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("t,gx,gy,gz,ax,ay,az,wr"));
    assert_eq!(text.lines().count(), 4001);
    let truth: TruthFile = read_json(&csv.with_extension("truth.json")).unwrap();
    assert!(truth.inertia_kg_m2.is_positive_definite());
    assert!((truth.wheel_impulse - REFERENCE_WHEEL_IMPULSE).abs() < 1e-12);
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"schema_version": 1, "simulation": {"inertia": [1, 0, 1, 0, 0, 1], "omega0": [1, 2, "x"]}}"#)
        .unwrap();
    let out = run(&["simulate", "--config", path_str(&cfg), "--out", path_str(&dir.path().join("o.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("simulation.omega0"), "{}", stderr(&out));

    fs::write(&cfg, r#"{"schema_version": 1, "simulaton": {}}"#).unwrap();
    let out = run(&["simulate", "--config", path_str(&cfg), "--out", path_str(&dir.path().join("o.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("simulaton"), "{}", stderr(&out));
}

#[test]
fn calibrate_recovers_synthetic_device() {
    let dir = tempfile::tempdir().unwrap();
    let bench = Bench::reference();
    let mut dev_files = Vec::new();
    let mut proof_files = Vec::new();
    for (k, t) in bench.device_only_throws(5, 300).unwrap().iter().enumerate() {
        dev_files.push(simulate_to(dir.path(), &format!("dev{k}"), &t.config, bench.noise.with_seed(300 + k as u64)));
    }
    let proof = mounted_proof();
    for (k, t) in bench.throws(Some(&proof), REFERENCE_WHEEL_IMPULSE, 5, 400).unwrap().iter().enumerate() {
        proof_files.push(simulate_to(dir.path(), &format!("proof{k}"), &t.config, bench.noise.with_seed(400 + k as u64)));
    }
    let dev = device_truth();
    let out_path = dir.path().join("cal.json");
    let pi: Vec<String> = proof_inertia().theta().iter().map(|v| v.to_string()).collect();
    let (pm, dm) = (PROOF_MASS.to_string(), dev.mass.to_string());
    let mut args = vec!["calibrate", "--device-only"];
    args.extend(dev_files.iter().map(|p| path_str(p)));
    args.push("--proof");
    args.extend(proof_files.iter().map(|p| path_str(p)));
    args.push("--proof-inertia");
    args.extend(pi.iter().map(String::as_str));
    args.extend(["--proof-mass", &pm, "--device-mass", &dm, "--out", path_str(&out_path)]);
    let out = run(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("I_R_zz"));

    let cal = CalibrationFile::read(&out_path).unwrap();
    assert!((cal.i_r_zz / bench.wheel_inertia - 1.0).abs() < 0.01, "{}", cal.i_r_zz);
    let rel = (cal.i_dev - dev.inertia).frobenius_norm() / dev.inertia.frobenius_norm();
    assert!(rel < 0.01, "{rel}");
    assert!((cal.x_dev - dev.cog).norm() < 0.5e-3);

    // missing proof mass is a usage error
    let usage: Vec<&str> = args
        .iter()
        .copied()
        .enumerate()
        .filter(|(i, a)| *a != "--proof-mass" && (*i == 0 || args[i - 1] != "--proof-mass"))
        .map(|(_, a)| a)
        .collect();
    let out = run(&usage);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));

    // an all-zero proof inertia is rejected as a numerical failure
    let zeros: Vec<&str> = args
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let after = args[..i].iter().rposition(|x| *x == "--proof-inertia");
            match after {
                Some(j) if i > j && i <= j + 6 => "0",
                _ => a,
            }
        })
        .collect();
    let out = run(&zeros);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn estimate_config_e_at_experiment_noise() {
    let dir = tempfile::tempdir().unwrap();
    let cal = truth_calibration(dir.path());
    let (csv, object) = object_throw(dir.path(), GridConfig::E, NoiseModel::experiment(11), 11);
    let out_path = dir.path().join("result.json");
    let out = estimate(&csv, &cal, object.mass, &["--out", path_str(&out_path)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let result: ResultFile = read_json(&out_path).unwrap();
    let diag = result.i_obj.kg_mm2.diag();
    for (got, want) in diag.iter().zip(GridConfig::E.reference_diagonal()) {
        assert!((got / want - 1.0).abs() < 0.02, "{diag:?}");
    }
    assert!(result.flags.object_positive_definite);
    assert_eq!(result.schema_version, 1);
}

#[test]
fn unit_blocks_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let cal = truth_calibration(dir.path());
    let (csv, object) = object_throw(dir.path(), GridConfig::B, NoiseModel::experiment(2), 2);
    let out = estimate(&csv, &cal, object.mass, &[]);
    assert!(out.status.success());
    let result: ResultFile = serde_json::from_slice(&out.stdout).unwrap();
    for block in [result.i_obj, result.i_comb] {
        for (m, mm) in block.kg_m2.theta().iter().zip(block.kg_mm2.theta()) {
            assert_eq!(m * 1e6, mm);
        }
    }
    for block in [result.x_obj, result.x_comb] {
        assert_eq!(block.m * 1e3, block.mm);
    }
}

#[test]
fn noiseless_round_trip_recovers_truth() {
    let dir = tempfile::tempdir().unwrap();
    let cal = truth_calibration(dir.path());
    let (csv, object) = object_throw(dir.path(), GridConfig::B, NoiseModel::none(), 5);
    let out = estimate(&csv, &cal, object.mass, &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let result: ResultFile = serde_json::from_slice(&out.stdout).unwrap();
    let report = AccuracyReport::evaluate(&object.inertia, &result.i_obj.kg_m2).unwrap();
    assert!(report.epsilon < 0.005, "{report:?}");
    assert!(report.psi.to_degrees() < 0.5, "{report:?}");
    assert!((result.x_obj.m - object.cog).norm() < 0.1e-3);
}

#[test]
fn window_outside_recording_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cal = truth_calibration(dir.path());
    let (csv, object) = object_throw(dir.path(), GridConfig::E, NoiseModel::none(), 1);
    let out = estimate(&csv, &cal, object.mass, &["--window", "0.1:5.0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("window"), "{}", stderr(&out));
    let out = estimate(&csv, &cal, object.mass, &["--window", "nonsense"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn non_positive_definite_object_is_flagged_not_failed() {
    let dir = tempfile::tempdir().unwrap();
    let dev = device_truth();
    // a device claimed far heavier than it is leaves a non-physical object
    let cal = DeviceCalibration::new(dev.mass, dev.cog, dev.inertia.scaled(40.0), Bench::reference().wheel_inertia)
        .unwrap();
    let cal_path = dir.path().join("heavy.json");
    write_json(&cal_path, &CalibrationFile::new(&cal, FilterSpec::default())).unwrap();
    let (csv, object) = object_throw(dir.path(), GridConfig::E, NoiseModel::none(), 3);
    let out = estimate(&csv, &cal_path, object.mass, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let result: ResultFile = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!result.flags.object_positive_definite);
}

#[test]
fn missing_file_is_a_data_error() {
    let out = run(&["estimate", "--throw", "/nonexistent.csv", "--calibration", "x.json", "--object-mass", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/nonexistent.csv"));
}

fn sweep_spec(dir: &Path) -> PathBuf {
    let path = dir.join("spec.json");
    let pi = std::f64::consts::PI;
    let spec = serde_json::json!({
        "schema_version": 1,
        "sweep": {
            "parameter": "spin_magnitude",
            "grid": [2.0 * pi, 3.0 * pi, 4.0 * pi, 5.0 * pi, 6.0 * pi],
            "trials": 50,
            "seed": 99
        }
    });
    fs::write(&path, spec.to_string()).unwrap();
    path
}

#[test]
fn sweep_writes_one_row_per_trial_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let spec = sweep_spec(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out = run(&["sweep", "--spec", path_str(&spec), "--out-dir", path_str(&a), "--workers", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stderr(&out).lines().filter(|l| l.starts_with('[')).count(), 5);
    let out = run(&["sweep", "--spec", path_str(&spec), "--out-dir", path_str(&b), "--workers", "3"]);
    assert!(out.status.success());
    let trials = fs::read_to_string(a.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 1 + 250);
    assert_eq!(trials, fs::read_to_string(b.join("trials.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("summary.json")).unwrap(),
        fs::read(b.join("summary.json")).unwrap()
    );
}

#[test]
fn invalid_sweep_spec_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.json");
    fs::write(&path, r#"{"schema_version": 1, "sweep": {"parameter": "kappa_band", "grid": [3.0], "trials": 50}}"#)
        .unwrap();
    let out = run(&["sweep", "--spec", path_str(&path), "--out-dir", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn inertia_tensor_serialises_in_packed_order() {
    let i = InertiaTensor::from_theta([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    assert_eq!(serde_json::to_string(&i).unwrap(), "[1.0,2.0,3.0,4.0,5.0,6.0]");
}
