use dampedpp_core::analysis::AnalysisError;
use dampedpp_core::lyapunov::LyapunovError;
use dampedpp_core::{IntegrateError, ParamError, PlantError};

/// Failure of a command, carrying the process exit status it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<ParamError> for CliError {
    fn from(e: ParamError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.into())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl From<IntegrateError> for CliError {
    fn from(e: IntegrateError) -> Self {
        match e {
            IntegrateError::InvalidConfig
            | IntegrateError::InvalidSpan { .. }
            | IntegrateError::Domain(_) => CliError::Config(e.to_string()),
            IntegrateError::GuardViolation { .. } | IntegrateError::StepFailure { .. } => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

impl From<LyapunovError> for CliError {
    fn from(e: LyapunovError) -> Self {
        match e {
            LyapunovError::Root(_) | LyapunovError::BelowMinimum { .. } => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<PlantError> for CliError {
    fn from(e: PlantError) -> Self {
        match e {
            PlantError::Integrate(e) => e.into(),
            PlantError::Lyapunov(e) => e.into(),
            PlantError::InvalidParams(e) => e.into(),
            PlantError::Domain(e) => CliError::Config(e.to_string()),
            PlantError::NotStopped => CliError::Numeric(e.to_string()),
        }
    }
}
