//! Helpers shared by the CLI test targets: running the binary and checking emitted JSON
//! against the published schemas.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use posgraph::builder::lattice_coupling;
use serde_json::Value;

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_posgraph"));
    cmd.env("POSGRAPH_LOG", "error");
    cmd
}

pub struct Run {
    pub code: i32,
    pub stderr: String,
    pub stdout: String,
}

pub fn posgraph<I, S>(args: I) -> Run
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let Output {
        status,
        stdout,
        stderr,
    } = bin().args(args).output().expect("binary runs");
    Run {
        code: status.code().unwrap_or(-1),
        stderr: String::from_utf8_lossy(&stderr).into_owned(),
        stdout: String::from_utf8_lossy(&stdout).into_owned(),
    }
}

/// Write a generated benchmark circuit through `posgraph gen` and return its path.
pub fn gen(dir: &Path, family: &str, n: usize, seed: u64) -> PathBuf {
    let path = dir.join(format!("{family}_{n}_s{seed}.qasm"));
    let out = posgraph([
        "gen",
        "--family",
        family,
        "--qudits",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    path
}

/// A square lattice coupling file large enough for `n` qudits; returns the `--arch` value.
pub fn lattice_arch(dir: &Path, n: usize) -> String {
    let side = (1..).find(|s| s * s >= n).unwrap();
    let path = dir.join(format!("lattice_{side}x{side}.json"));
    std::fs::write(&path, serde_json::to_string(&lattice_coupling(side, side)).unwrap()).unwrap();
    format!("coupling:@{}", path.display())
}

/// Compile into `out` and return the process result.
pub fn compile(circuit: &Path, arch: &str, router: &str, seed: u64, passes: usize, out: &Path) -> Run {
    posgraph([
        "compile",
        "--circuit",
        circuit.to_str().unwrap(),
        "--arch",
        arch,
        "--router",
        router,
        "--seed",
        &seed.to_string(),
        "--passes",
        &passes.to_string(),
        "--out",
        out.to_str().unwrap(),
    ])
}

pub fn replay(artifact: &Path, circuit: &Path, arch: &str) -> Run {
    posgraph([
        "verify",
        "--replay",
        artifact.to_str().unwrap(),
        "--circuit",
        circuit.to_str().unwrap(),
        "--arch",
        arch,
    ])
}

pub fn diff(a: &Path, b: &Path) -> Run {
    posgraph(["verify", "--diff", a.to_str().unwrap(), b.to_str().unwrap()])
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas")
}

/// Validate `instance` against `docs/schemas/<name>.schema.json`.
pub fn check_schema(name: &str, instance: &Value) -> Result<(), String> {
    let schema = read_json(&schema_dir().join(format!("{name}.schema.json")));
    let validator = jsonschema::validator_for(&schema).map_err(|e| format!("{name}: bad schema: {e}"))?;
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| e.to_string()).collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(format!("{name}: {}", errors.join("; ")))
    }
}
