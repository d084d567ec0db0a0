use std::fmt;
use std::path::Path;

use skillcell_cellsim::{ClientError, LoadError};
use skillcell_taskexec::ExecError;

/// Exit code per error category. Every category has its own code.
const EXIT_CODES: &[(&str, i32)] = &[
    ("UsageError", 2),
    ("IoError", 3),
    ("ParseError", 4),
    ("VersionMismatch", 5),
    ("InvalidModel", 6),
    ("InvalidPlan", 7),
    ("InvalidRecipe", 8),
    ("MalformedId", 9),
    ("MalformedAnnotation", 10),
    ("DuplicateOrder", 11),
    ("ArityMismatch", 12),
    ("UnknownTarget", 13),
    ("UnknownWire", 14),
    ("UnknownPart", 15),
    ("InsufficientFeatures", 16),
    ("DegenerateGeometry", 17),
    ("DegenerateVertices", 18),
    ("TooFewPoints", 19),
    ("LengthMismatch", 20),
    ("ZeroLength", 21),
    ("NoConsistentMatch", 22),
    ("AmbiguousMatch", 23),
    ("LocalizationFailed", 24),
    ("MissingLocalization", 25),
    ("MissingLocalizationRecipe", 26),
    ("UnknownSkill", 27),
    ("CellError", 28),
    ("ConnectionError", 29),
    ("TraceViolation", 30),
];

/// Exit code for an unlisted category.
const OTHER_EXIT: i32 = 1;

pub fn exit_code(category: &str) -> i32 {
    EXIT_CODES
        .iter()
        .find(|(c, _)| *c == category)
        .map_or(OTHER_EXIT, |&(_, code)| code)
}

#[derive(Debug)]
pub struct CliError {
    pub category: String,
    pub message: String,
}

impl CliError {
    pub fn new(category: &str, message: impl Into<String>) -> Self {
        CliError {
            category: category.to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::new("IoError", format!("{}: {e}", path.display()))
    }

    pub fn in_file(path: &Path, e: skillcell_core::Error) -> Self {
        CliError::new(e.category(), format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        exit_code(&self.category)
    }
}

impl fmt::Display for CliError {
    /// Single line: `error[Category]: message`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = self.message.replace(['\n', '\r'], " ");
        write!(f, "error[{}]: {msg}", self.category)
    }
}

impl From<skillcell_core::Error> for CliError {
    fn from(e: skillcell_core::Error) -> Self {
        CliError::new(e.category(), e.to_string())
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        CliError::new(e.category(), e.to_string())
    }
}

impl From<ExecError> for CliError {
    fn from(e: ExecError) -> Self {
        CliError::new(e.category(), e.to_string())
    }
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Cell(c) => CliError::new("CellError", c.to_string()),
            other => CliError::new("ConnectionError", other.to_string()),
        }
    }
}
