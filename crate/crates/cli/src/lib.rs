//! Driver pieces behind the `posgraph` binary: single compilations with run reports, artifact
//! replay and diffing, and the benchmark harness.

pub mod bench;
pub mod check;
pub mod compile;

pub use compile::{Artifact, CircuitInput, RunError, RunOptions, RunReport, Router};
