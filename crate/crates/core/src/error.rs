use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("all rows of the view are identical; bandwidth is undefined")]
    AllRowsIdentical,

    #[error("input contains non-finite values ({0})")]
    NonFiniteInput(&'static str),

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("group structure does not match the variable count: {0}")]
    GroupMismatch(String),

    #[error("objective became non-finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("backtracking exceeded {0} step-size doublings")]
    BacktrackingExhausted(usize),

    #[error("class {0} has no samples")]
    EmptyClass(usize),

    #[error("categorical outcome needs at least two classes")]
    SingleClass,

    #[error("linear system for the loadings is singular")]
    SingularSystem,

    #[error("Procrustes input is rank deficient")]
    RankDeficient,

    #[error("model is missing fitted state: {0}")]
    UnfittedModel(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),

    #[error("unsupported model format version {found} (expected {expected})")]
    FormatVersionMismatch { found: u32, expected: u32 },

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("{path}: parse error at row {row}, column {col}: {msg}")]
    Parse {
        path: PathBuf,
        row: usize,
        col: usize,
        msg: String,
    },

    #[error("row count mismatch: {first} has {first_rows} rows but {second} has {second_rows}")]
    RowCountMismatch {
        first: PathBuf,
        first_rows: usize,
        second: PathBuf,
        second_rows: usize,
    },

    #[error("{path}: variable '{variable}' is assigned to more than one group")]
    OverlappingGroups { path: PathBuf, variable: String },

    #[error("{path}: {missing} variable(s) have no group, first is '{first}'")]
    IncompleteGroups {
        path: PathBuf,
        missing: usize,
        first: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable variant name used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::AllRowsIdentical => "AllRowsIdentical",
            Error::NonFiniteInput(_) => "NonFiniteInput",
            Error::InvalidDimension(_) => "InvalidDimension",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::GroupMismatch(_) => "GroupMismatch",
            Error::NonFiniteObjective { .. } => "NonFiniteObjective",
            Error::BacktrackingExhausted(_) => "BacktrackingExhausted",
            Error::EmptyClass(_) => "EmptyClass",
            Error::SingleClass => "SingleClass",
            Error::SingularSystem => "SingularSystem",
            Error::RankDeficient => "RankDeficient",
            Error::UnfittedModel(_) => "UnfittedModel",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::FormatVersionMismatch { .. } => "FormatVersionMismatch",
            Error::ModelFormat(_) => "ModelFormat",
            Error::Parse { .. } => "ParseError",
            Error::RowCountMismatch { .. } => "RowCountMismatch",
            Error::OverlappingGroups { .. } => "OverlappingGroups",
            Error::IncompleteGroups { .. } => "IncompleteGroups",
            Error::Io { .. } => "IoError",
            Error::Json(_) => "JsonError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
