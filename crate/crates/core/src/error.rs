use thiserror::Error;

/// Errors raised by the library. Each variant maps onto one failure class
/// that callers (notably the CLI) translate into exit codes.
#[derive(Debug, Error)]
pub enum TcnError {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("{path}:{line}: {message}")]
    Ingestion {
        path: String,
        line: usize,
        message: String,
    },

    #[error("checkpoint error: {0}")]
    Persistence(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl TcnError {
    pub(crate) fn shape(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        TcnError::Shape {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    /// True for errors caused by bad user input rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            TcnError::Argument(_)
                | TcnError::Shape { .. }
                | TcnError::Config(_)
                | TcnError::Ingestion { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, TcnError>;
