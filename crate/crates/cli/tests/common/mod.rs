#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bilift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bilift"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn ok(args: &[&str]) -> Output {
    let out = bilift(args);
    assert_eq!(
        code(&out),
        0,
        "bilift {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

/// Panics with every violation if `value` does not match `schemas/<name>`.
pub fn assert_schema(name: &str, value: &serde_json::Value) {
    let schema = read_json(&schema_dir().join(name));
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator
        .iter_errors(value)
        .map(|e| e.to_string())
        .collect();
    assert!(errors.is_empty(), "{name}: {errors:?}\n{value:#}");
}

/// Writes the reference example series and returns its path.
pub fn paper_series(dir: &Path, eps: f64, seed: u64) -> PathBuf {
    let out = dir.join(format!("paper_{eps}_{seed}.csv"));
    ok(&[
        "paper-example",
        "--eps",
        &eps.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        path_str(&out),
    ]);
    out
}

/// Simulates the reference model with a Gaussian basis (N = 60, m = 10).
pub fn gaussian_series(dir: &Path, eps: f64, seed: u64) -> PathBuf {
    let out = dir.join(format!("gauss_{eps}_{seed}.csv"));
    let noise = if eps > 0.0 { "uniform" } else { "none" };
    ok(&[
        "simulate",
        "--a=-0.3",
        "--b",
        "3,2,1",
        "--basis",
        "gaussian",
        "--m",
        "10",
        "--N",
        "60",
        "--noise",
        noise,
        "--eps",
        &eps.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        path_str(&out),
    ]);
    out
}

pub const EXAMPLE_ORDERS: [&str; 6] = ["--na", "1", "--nb", "3", "--nk", "0"];

pub fn scale_invariant_error(v: &[f64], w: &[f64]) -> f64 {
    let dot: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>();
    let nw: f64 = w.iter().map(|a| a * a).sum::<f64>();
    if nw == 0.0 {
        return 1.0;
    }
    (1.0 - dot * dot / (nv * nw)).max(0.0).sqrt()
}

pub fn floats(v: &serde_json::Value) -> Vec<f64> {
    v.as_array()
        .expect("array")
        .iter()
        .map(|x| x.as_f64().expect("number"))
        .collect()
}
