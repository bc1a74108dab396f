use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: missing column `{column}`")]
    Schema { path: String, column: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("sentence {sentence_id}: {message}")]
    Tree {
        sentence_id: String,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("density undefined for `{0}`: transcript has no word tokens")]
    UndefinedDensity(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("no specificity score for sentence `{0}`")]
    MissingScore(String),

    #[error("model fit failed: {0}")]
    Fit(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code for the CLI: 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Context { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
        match err.into_kind() {
            csv::ErrorKind::Io(e) => Error::io("<csv>", e),
            kind => Error::Parse {
                path: "<csv>".into(),
                line,
                message: format!("{kind:?}"),
            },
        }
    }
}
