//! Batch front-end for `flatcusp-core`: TOML experiment configs, a
//! deterministic parallel runner with checkpoints, and JSON/CSV reports
//! listed in a MANIFEST.

pub mod commands;
pub mod config;
pub mod output;
pub mod runner;

pub use config::{load_config, parse_config, ExperimentConfig, RunSection};
