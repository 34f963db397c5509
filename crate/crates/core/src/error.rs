use thiserror::Error;

/// Errors raised by the numerical core and the scenario runner.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("derivative order {order} exceeds the profile maximum {max}")]
    OrderExceeded { order: usize, max: usize },

    #[error("domain error at t = {t}: {reason}")]
    Domain { t: f64, reason: String },

    #[error("quadrature did not converge on [{a}, {b}]: achieved {achieved:e}, requested {requested:e}")]
    QuadratureNonConvergence {
        a: f64,
        b: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("tolerance {tol:e} not achieved: step budget exhausted at t = {t}")]
    ToleranceNotAchieved { t: f64, tol: f64 },

    #[error("inversion bracket failure for t = {t}: {reason}")]
    BracketFailure { t: f64, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("unknown identifier `{0}`")]
    Unknown(String),

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::QuadratureNonConvergence { .. }
                | Error::StepSizeUnderflow { .. }
                | Error::ToleranceNotAchieved { .. }
                | Error::BracketFailure { .. }
                | Error::Degenerate(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
