use thiserror::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Degenerate(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<hdustat::Error> for CliError {
    fn from(e: hdustat::Error) -> Self {
        match e {
            hdustat::Error::Config(_) | hdustat::Error::UnsupportedPair { .. } => {
                CliError::Config(e.to_string())
            }
            hdustat::Error::Input(_) => CliError::Data(e.to_string()),
            hdustat::Error::DegeneratePair { .. } => CliError::Degenerate(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
