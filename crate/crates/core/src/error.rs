use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed line in a TSV or text input.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Malformed or invalid record in a benchmark JSONL file.
    #[error("load error at line {line}: {message}")]
    Load { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The token-probability provider failed or broke protocol.
    #[error("provider error: {0}")]
    Provider(String),

    #[error("item {id}: {source}")]
    Item {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn arg(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    /// True when the root cause is a provider failure.
    pub fn is_provider(&self) -> bool {
        match self {
            Error::Provider(_) => true,
            Error::Item { source, .. } => source.is_provider(),
            _ => false,
        }
    }
}
