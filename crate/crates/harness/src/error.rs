use serde::Serialize;

/// Process exit status of `membrane-sim run`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitStatus {
    Passed,
    CheckFailed,
    AssumptionFailure,
    Error,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Passed => 0,
            ExitStatus::CheckFailed => 1,
            ExitStatus::AssumptionFailure => 2,
            ExitStatus::Error => 3,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("assumption failure: {0}")]
    Assumption(String),
    #[error(transparent)]
    Core(#[from] membrane_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("frame format error: {0}")]
    Frame(String),
}

/// Machine-readable error record printed to stderr.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub status: ExitStatus,
    pub kind: &'static str,
    pub message: String,
}

impl HarnessError {
    pub fn status(&self) -> ExitStatus {
        match self {
            HarnessError::Assumption(_) => ExitStatus::AssumptionFailure,
            _ => ExitStatus::Error,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::Assumption(_) => "assumption",
            HarnessError::Core(e) => match e {
                membrane_core::Error::WindowExhausted { .. } => "window-exhausted",
                membrane_core::Error::NewtonNonConvergence { .. } => "newton-non-convergence",
                membrane_core::Error::QuadratureNonConvergence { .. } => "quadrature-non-convergence",
                membrane_core::Error::Smallness { .. } => "smallness",
                membrane_core::Error::HorizonExhausted { .. } => "horizon-exhausted",
                _ => "core",
            },
            HarnessError::Io(_) => "io",
            HarnessError::Csv(_) => "csv",
            HarnessError::Frame(_) => "frame",
        }
    }

    pub fn record(&self) -> ErrorRecord {
        ErrorRecord { status: self.status(), kind: self.kind(), message: self.to_string() }
    }
}
