use std::path::Path;

use thiserror::Error;

/// Command failure; [`AppError::exit_code`] gives the process status.
#[derive(Debug, Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("weights error: {0}")]
    Weights(String),
    #[error("{0}")]
    Other(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Data(_) => 3,
            AppError::Weights(_) => 4,
            AppError::Other(_) => 1,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        AppError::Other(format!("{}: {e}", path.display()))
    }
}

impl From<cxrnet_core::Error> for AppError {
    fn from(e: cxrnet_core::Error) -> Self {
        use cxrnet_core::Error as E;
        match e {
            E::Config(_) => AppError::Config(e.to_string()),
            E::Data(_) | E::Shape(_) => AppError::Data(e.to_string()),
            E::Format(_) => AppError::Weights(e.to_string()),
            E::NonFinite(_) | E::State(_) => AppError::Other(e.to_string()),
        }
    }
}
