use std::path::PathBuf;

/// Unified error type for the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed JSON. `offset` is the byte offset of the first invalid input.
    #[error("parse error in {file} at byte {offset} (line {line}, column {column}): {message}")]
    Parse {
        file: PathBuf,
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },

    /// Structurally valid JSON that does not match the expected schema.
    /// `path` names the offending JSON location, e.g. `turns[3].utterance`.
    #[error("schema error in {file} at {path}: {message}")]
    Schema {
        file: PathBuf,
        path: String,
        message: String,
    },

    #[error("empty corpus")]
    EmptyCorpus,

    /// A caller violated an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("embedding service transport failure for {url} after {attempts} attempts: {message}")]
    Transport {
        url: String,
        attempts: u32,
        message: String,
    },

    /// The embedding service answered, but with something we cannot use.
    #[error("embedding service protocol error: {0}")]
    Protocol(String),

    #[error("model artifact is missing {0}")]
    MissingFile(PathBuf),

    #[error("unsupported artifact version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    /// An imported or constructed model failed invariant re-validation.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("model has no topics")]
    NoTopics,

    #[error("unknown topic id {0}")]
    UnknownTopic(i32),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
