use thiserror::Error;

/// Exit code for bad input: unreadable files, malformed data, invalid
/// parameters.
pub const EXIT_INPUT: i32 = 2;
/// Exit code for a broken internal invariant.
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl From<lssfind::Error> for CliError {
    fn from(e: lssfind::Error) -> Self {
        use lssfind::Error as E;
        match e {
            E::EmptyNode | E::PartitionMismatch(_) | E::NoQualifyingBsis => CliError::Internal(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
