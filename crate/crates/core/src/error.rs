use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular {what}{} (condition estimate {cond:.3e})", step_suffix(*.step))]
    Singular {
        what: &'static str,
        step: Option<usize>,
        cond: f64,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("{source_name}:{line}: column {column} value {value} outside [{lo}, {hi}]")]
    Range {
        source_name: String,
        line: usize,
        column: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn step_suffix(step: Option<usize>) -> String {
    match step {
        Some(t) => format!(" at step {t}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }

    /// Wraps the error with a description of where it happened (song, emotion, fold).
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Strips context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerical routines rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self.root(),
            Error::Singular { .. } | Error::UndefinedCorrelation(_)
        )
    }

    /// Process exit code: 1 for input errors, 2 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        if self.is_numeric() {
            2
        } else {
            1
        }
    }
}
