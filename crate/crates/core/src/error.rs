use thiserror::Error;

pub type Result<T> = std::result::Result<T, RankError>;

#[derive(Debug, Error)]
pub enum RankError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("entry ({row}, {col}) = {value} must be finite and nonnegative")]
    InvalidEntry { row: usize, col: usize, value: f64 },

    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),

    #[error("graph is not strongly connected ({} components)", components.len())]
    NotStronglyConnected { components: Vec<Vec<usize>> },

    #[error("singular linear system (pivot {pivot:e} in column {column})")]
    Singular { column: usize, pivot: f64 },

    #[error(
        "{method} did not converge after {iterations} iterations (residual {residual:e}); {hint}"
    )]
    NotConverged {
        method: &'static str,
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
        residual_tail: Vec<f64>,
        hint: &'static str,
    },

    #[error("non-finite value for good {good} at iteration {iteration}")]
    NonFinite { good: usize, iteration: usize },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RankError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        RankError::InvalidInput(msg.into())
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        RankError::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
