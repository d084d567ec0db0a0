use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("point lists differ in length: {source_len} vs {target_len}")]
    LengthMismatch { source_len: usize, target_len: usize },
    #[error("malformed part id {text:?}: {reason}")]
    MalformedId { text: String, reason: String },
    #[error("unknown target {0}")]
    UnknownTarget(String),
    #[error("malformed annotation {text:?}: {reason}")]
    MalformedAnnotation { text: String, reason: String },
    #[error("duplicate order {0}")]
    DuplicateOrder(u32),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("unknown wire {0:?}")]
    UnknownWire(String),
    #[error("wire {0:?} has zero length")]
    ZeroLength(String),
    #[error("insufficient features: {got} usable, at least 3 required")]
    InsufficientFeatures { got: usize },
    #[error("degenerate vertices: {0}")]
    DegenerateVertices(String),
    #[error("step {order}: skill {skill} expects {expected} target(s), got {got}")]
    ArityMismatch {
        order: u32,
        skill: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("parse error at {path} (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported schema version {found:?}, expected {expected:?}")]
    VersionMismatch { found: String, expected: String },
    #[error("no consistent feature match")]
    NoConsistentMatch,
    #[error("ambiguous feature match: {0}")]
    AmbiguousMatch(String),
    #[error("unknown part {0}")]
    UnknownPart(String),
    #[error("invalid recipe: {0}")]
    InvalidRecipe(String),
}

impl Error {
    /// Stable machine-readable name, used as the CLI error category.
    pub fn category(&self) -> &'static str {
        match self {
            Error::TooFewPoints { .. } => "TooFewPoints",
            Error::DegenerateGeometry(_) => "DegenerateGeometry",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::MalformedId { .. } => "MalformedId",
            Error::UnknownTarget(_) => "UnknownTarget",
            Error::MalformedAnnotation { .. } => "MalformedAnnotation",
            Error::DuplicateOrder(_) => "DuplicateOrder",
            Error::InvalidModel(_) => "InvalidModel",
            Error::UnknownWire(_) => "UnknownWire",
            Error::ZeroLength(_) => "ZeroLength",
            Error::InsufficientFeatures { .. } => "InsufficientFeatures",
            Error::DegenerateVertices(_) => "DegenerateVertices",
            Error::ArityMismatch { .. } => "ArityMismatch",
            Error::InvalidPlan(_) => "InvalidPlan",
            Error::Parse { .. } => "ParseError",
            Error::VersionMismatch { .. } => "VersionMismatch",
            Error::NoConsistentMatch => "NoConsistentMatch",
            Error::AmbiguousMatch(_) => "AmbiguousMatch",
            Error::UnknownPart(_) => "UnknownPart",
            Error::InvalidRecipe(_) => "InvalidRecipe",
        }
    }

    pub(crate) fn from_json(err: serde_path_to_error::Error<serde_json::Error>) -> Self {
        let path = err.path().to_string();
        let inner = err.into_inner();
        Error::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    }
}

/// Deserialize a JSON document, reporting the failing field path on error.
pub fn from_json_str<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(Error::from_json)?;
    de.end().map_err(|e| Error::Parse {
        path: ".".into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(value)
}
