use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HkeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph is not connected ({components} components)")]
    Disconnected { components: usize },

    #[error("vertex {0} out of range")]
    VertexOutOfRange(usize),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("solver failed to converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("condition not applicable: {0}")]
    NotApplicable(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for HkeError {
    fn from(e: std::io::Error) -> Self {
        HkeError::Io(e.to_string())
    }
}

pub type Result<T, E = HkeError> = std::result::Result<T, E>;
