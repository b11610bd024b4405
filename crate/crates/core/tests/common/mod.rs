#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use throw_inertia::dynamics::{NoiseModel, SimConfig};
use throw_inertia::io::{write_json, SimulateFile, SCHEMA_VERSION};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_throw-inertia"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Writes a simulation config and runs `simulate` on it, returning the CSV path.
pub fn simulate_to(dir: &Path, name: &str, cfg: &SimConfig, noise: NoiseModel) -> PathBuf {
    let config = dir.join(format!("{name}.sim.json"));
    write_json(
        &config,
        &SimulateFile {
            schema_version: SCHEMA_VERSION,
            simulation: cfg.clone(),
            noise,
        },
    )
    .unwrap();
    let csv = dir.join(format!("{name}.csv"));
    let out = run(&["simulate", "--config", path_str(&config), "--out", path_str(&csv)]);
    assert!(out.status.success(), "simulate failed: {}", stderr(&out));
    csv
}
