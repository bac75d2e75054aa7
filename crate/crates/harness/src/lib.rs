//! Experiment harness for `membrane-core`: configuration, named experiments,
//! CSV and SVG artifacts, the binary path-frame format and the `membrane-sim` CLI.

pub mod config;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod report;
pub mod svg;

use std::path::PathBuf;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{ExitStatus, HarnessError};
pub use experiments::execute;
pub use report::{Check, Report};

/// Result of [`run`]: the report, its status and the files written.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub status: ExitStatus,
    pub written: Vec<PathBuf>,
}

/// Executes `cfg` and writes its artifacts into [`ExperimentConfig::out_dir`].
pub fn run(cfg: &ExperimentConfig, force: bool) -> Result<Outcome, HarnessError> {
    let report = execute(cfg, force)?;
    let written = report.write(&cfg.out_dir())?;
    let status = match (report.passed(), cfg.experiment) {
        (true, _) => ExitStatus::Passed,
        (false, ExperimentKind::Validate) => ExitStatus::AssumptionFailure,
        (false, _) => ExitStatus::CheckFailed,
    };
    Ok(Outcome { report, status, written })
}
