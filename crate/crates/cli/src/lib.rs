//! Command-line front end and benchmark harness for the `aerostereo` matchers.
//!
//! The library side exposes the pieces the `aerostereo` binary is built from:
//! manifest parsing, per-method run configuration, the dataset sweep with its
//! JSON/CSV reports, standalone evaluation and synthetic scene export.

pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod manifest;
pub mod synth;

pub use bench::{run_benchmark, BenchOptions, BenchReport};
pub use config::{Method, RunConfig};
pub use error::{CliError, Result};
pub use eval::{eval_single, EvalSettings};
pub use manifest::{parse_manifest, Manifest};
