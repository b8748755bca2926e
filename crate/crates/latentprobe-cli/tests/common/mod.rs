//! Helpers shared by the integration suites: binary invocation, spec
//! files, and report masking.
//!
//! Each suite compiles its own copy and uses a different subset.
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use latentprobe::corpus::{two_factor_spec, SyntheticSpec};

/// Runs the compiled binary in `dir` with extra environment variables.
pub fn run_in(dir: &Path, args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_latentprobe"));
    cmd.current_dir(dir).args(args);
    for (key, value) in envs {
        cmd.env(key, value);
    }
    cmd.output().expect("binary runs")
}

pub fn run(dir: &Path, args: &[&str]) -> Output {
    run_in(dir, args, &[])
}

pub fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

pub fn stdout_text(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

/// Writes a two-factor corpus spec as JSON and returns it.
pub fn write_spec(
    path: &Path,
    n: usize,
    layers: usize,
    dim: usize,
    sigma: f64,
    seed: u64,
    gloss_layer: usize,
    style_layer: usize,
) -> SyntheticSpec {
    let spec = two_factor_spec(n, layers, dim, sigma, seed, gloss_layer, style_layer);
    let text = serde_json::to_string_pretty(&spec).expect("spec serializes");
    std::fs::write(path, text).expect("spec writes");
    spec
}

/// Parses a report and nulls its volatile subtree so runs can be compared.
pub fn masked_report(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path).expect("report exists");
    let mut value: serde_json::Value = serde_json::from_str(&text).expect("report parses");
    value["run_meta"] = serde_json::Value::Null;
    value
}
