//! Experiment harness around `calderon-core`: config parsing, staged runs,
//! and the report, summary and plot-data files a run leaves behind.

pub mod config;
pub mod emit;
pub mod harness;

pub use config::{AutoOr, DecaySpec, ExperimentConfig, FamilySpec, Formula, Scan, Seeds, Tolerances};
pub use emit::{write_artifacts, ArtifactEntry, Manifest};
pub use harness::{run_experiment, Gate, RunOutcome, RunReport, StageRecord, StageStatus};

use thiserror::Error;

/// Exit code of a completed run.
pub const EXIT_OK: i32 = 0;
/// A gating tolerance failed or a stage halted the run.
pub const EXIT_FAILED: i32 = 1;
/// The configuration or an input file could not be used.
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("{0}")]
    Input(String),
    #[error("i/o error on {path}: {source}")]
    Output {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        EXIT_INPUT
    }
}

/// Run `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn run_with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, LabError> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| LabError::Input(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
