use homog_core::HomogError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(HomogError),

    #[error("insufficient points in window (found {found}, need 3)")]
    InsufficientPoints { found: usize },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("malformed CSV: {0}")]
    Csv(String),
}

impl CliError {
    /// 1 for anything the user can fix by changing the input, 2 for
    /// failures of the numerics themselves.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

impl From<HomogError> for CliError {
    fn from(e: HomogError) -> Self {
        match e {
            HomogError::InvalidMesh(_)
            | HomogError::InvalidParameter(_)
            | HomogError::NotPeriodic
            | HomogError::AveragingBoxTooLarge { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
