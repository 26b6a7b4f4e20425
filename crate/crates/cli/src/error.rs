use serde::Serialize;
use thiserror::Error;

/// Exit codes of the `tomocal` binary.
pub mod exit {
    pub const OK: u8 = 0;
    pub const INVALID_INPUT: u8 = 2;
    pub const SOLVER: u8 = 3;
    pub const ALL_FAILED: u8 = 4;
    pub const INCONSISTENT: u8 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Solver(#[from] tomocal_core::Error),

    #[error("every realization failed at noise level {level}")]
    AllFailed { level: f64 },
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    views: Vec<usize>,
    exit_code: u8,
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Io { .. } => exit::INVALID_INPUT,
            CliError::Solver(_) => exit::SOLVER,
            CliError::AllFailed { .. } => exit::ALL_FAILED,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "invalid_input",
            CliError::Io { .. } => "io",
            CliError::Solver(_) => "solver",
            CliError::AllFailed { .. } => "all_realizations_failed",
        }
    }

    /// Machine-readable one-line JSON for stderr.
    pub fn to_json(&self) -> String {
        let views = match self {
            CliError::Solver(e) => e.views(),
            _ => Vec::new(),
        };
        serde_json::to_string(&ErrorReport {
            error: self.kind(),
            message: self.to_string(),
            views,
            exit_code: self.exit_code(),
        })
        .expect("error report serializes")
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
