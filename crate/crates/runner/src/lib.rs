//! Parameter sweeps, CSV export and the acceptance suite built on `cov3d-core`.

pub mod acceptance;
pub mod config;
pub mod output;
pub mod sweep;

pub use config::ExperimentConfig;

/// Errors of the runner, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration `{field}`: {detail}")]
    Invalid { field: String, detail: String },
    #[error("could not parse configuration: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] cov3d_core::Error),
    #[error("acceptance failed: {0}")]
    Acceptance(String),
}

impl RunError {
    pub fn invalid(field: impl Into<String>, detail: impl Into<String>) -> Self {
        RunError::Invalid { field: field.into(), detail: detail.into() }
    }

    /// Qualify a core configuration error with its config section.
    pub fn prefixed(section: &str, e: cov3d_core::Error) -> Self {
        match e {
            cov3d_core::Error::Config { parameter, detail } => {
                RunError::invalid(format!("{section}.{parameter}"), detail)
            }
            other => RunError::Core(other),
        }
    }

    /// 1 for invalid input, 2 for numerical failure, 3 for a failed acceptance run.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Invalid { .. } | RunError::Parse(_) | RunError::Io(_) => 1,
            RunError::Core(cov3d_core::Error::Config { .. } | cov3d_core::Error::Domain { .. }) => 1,
            RunError::Core(_) => 2,
            RunError::Acceptance(_) => 3,
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}
