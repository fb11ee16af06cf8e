//! Experiment harness around `netweave-core`: configuration, pipeline runs
//! and summary tables.

pub mod config;
pub mod pipeline;
pub mod summary;

use anyhow::Result;

pub use config::{Algorithm, ExperimentConfig, Frames};
pub use pipeline::{run_all, BudgetPolicy, RunKey, RunResult, Stage};

/// Runs the topology stage over every key, tolerating brute-force budget
/// overruns, and writes the summaries under `<scenario>/summary`.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Vec<RunResult>> {
    let results = run_all(cfg, Stage::Topology, BudgetPolicy::CountOnly)?;
    summary::write_summaries(cfg, &results, &cfg.scenario_dir().join("summary"))?;
    Ok(results)
}

/// Name of the failing error variant, for the machine-readable error record.
pub fn error_kind(err: &anyhow::Error) -> String {
    match err.chain().find_map(|e| e.downcast_ref::<netweave_core::Error>()) {
        Some(e) => {
            let dbg = format!("{e:?}");
            dbg.split(|c: char| !c.is_alphanumeric())
                .next()
                .unwrap_or("Core")
                .to_string()
        }
        None => "Harness".to_string(),
    }
}
