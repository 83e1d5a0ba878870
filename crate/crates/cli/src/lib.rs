//! Experiment runner behind the `hkelab` binary: TOML configs, step
//! execution, manifests and drift comparison.

pub mod config;
pub mod manifest;
pub mod run;
