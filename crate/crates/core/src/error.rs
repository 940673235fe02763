use std::path::PathBuf;

/// Errors surfaced by the engine. Each variant names the subsystem it came from.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("kg: {path}:{line}: {message}")]
    FactParse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("kg: duplicate fact id `{id}` at line {line}")]
    DuplicateFact { id: String, line: usize },
    #[error("embeddings: empty input")]
    EmptyInput,
    #[error("embeddings: dimension mismatch (file has {found}, configured {expected})")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{module}: {path}:{line}: malformed line: {message}")]
    Malformed {
        module: &'static str,
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("policy: shape mismatch: {0}")]
    Shape(String),
    #[error("policy: invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("ref-predictor: no score for pair digest {digest}")]
    MissingScore { digest: String },
    #[error("ref-predictor: {0}")]
    Predictor(String),
    #[error("eval: {0}")]
    Eval(String),
    #[error("config: {0}")]
    Config(String),
    #[error("service: unknown session `{0}`")]
    UnknownSession(String),
    #[error("service: {0}")]
    Service(String),
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
