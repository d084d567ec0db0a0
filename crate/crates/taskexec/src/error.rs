use skillcell_cellsim::{CellError, ClientError};
use skillcell_core::partmodel::PartId;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("recipe is invalid: {}", .0.join("; "))]
    InvalidRecipe(Vec<String>),
    #[error("no localization recipe loaded for {0:?}")]
    MissingLocalizationRecipe(String),
    #[error("no skill registered as {0:?}")]
    UnknownSkill(String),
    #[error("pose in frame object:{0} used before the part was localized")]
    MissingLocalization(PartId),
    #[error("localizing {part}: {source}")]
    LocalizationFailed {
        part: PartId,
        #[source]
        source: skillcell_core::Error,
    },
    #[error("{op} rejected by cell: {error}")]
    Cell { op: String, error: CellError },
    #[error("{op}: {message}")]
    Connection { op: String, message: String },
}

impl ExecError {
    pub fn category(&self) -> &'static str {
        match self {
            ExecError::InvalidRecipe(_) => "InvalidRecipe",
            ExecError::MissingLocalizationRecipe(_) => "MissingLocalizationRecipe",
            ExecError::UnknownSkill(_) => "UnknownSkill",
            ExecError::MissingLocalization(_) => "MissingLocalization",
            ExecError::LocalizationFailed { .. } => "LocalizationFailed",
            ExecError::Cell { .. } => "CellError",
            ExecError::Connection { .. } => "ConnectionError",
        }
    }

    pub(crate) fn from_client(op: &str, e: ClientError) -> Self {
        match e {
            ClientError::Cell(error) => ExecError::Cell {
                op: op.to_string(),
                error,
            },
            other => ExecError::Connection {
                op: op.to_string(),
                message: other.to_string(),
            },
        }
    }
}
