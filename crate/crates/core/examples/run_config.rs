//! Loads an experiment config and runs it in-process.
//!
//! cargo run --example run_config -- crates/core/examples/configs/saddle_minmax.toml

use std::path::{Path, PathBuf};

use dsmm::experiment::{resolve_jobs, run_experiment, ExperimentConfig};

fn main() -> dsmm::error::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/saddle_minmax.toml"));
    let cfg = ExperimentConfig::load(&path)?;
    let out = run_experiment(&cfg, path.parent().unwrap(), resolve_jobs(None))?;
    println!("{}", serde_json::to_string_pretty(&out.summary.runs)?);
    println!("exit code {}", out.exit_code);
    Ok(())
}
