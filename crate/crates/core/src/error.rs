use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty document")]
    EmptyDocument,
    #[error("empty text")]
    EmptyText,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate doc_id `{0}`")]
    DuplicateDocument(String),
    #[error("duplicate chunk_id `{0}`")]
    DuplicateChunk(String),
    #[error("unknown chunk `{0}`")]
    UnknownChunk(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("field `{field}` expects a {expected} query")]
    QueryKind { field: String, expected: &'static str },
    #[error("chunk `{0}` appears in no ranked list")]
    NotRanked(String),
    #[error("golden set is empty")]
    EmptyGolden,
    #[error("reference set is empty")]
    EmptyReference,
    #[error("invalid feedback: {0}")]
    InvalidFeedback(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("query provider failed: {0}")]
    Provider(String),
    #[error("query pool has {available} queries but {required} are required")]
    InsufficientQueries { available: usize, required: usize },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// True for failures of the environment (files, locks) rather than of the input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
