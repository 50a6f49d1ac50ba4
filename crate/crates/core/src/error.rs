use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("field `{0}` has no stream function")]
    NoStreamFunction(String),

    #[error("split term is not orthogonal: <d, e> = {0:e}")]
    NotOrthogonal(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite noise coefficient `{0}`")]
    NonFiniteCoefficient(&'static str),

    #[error("negative radicand {0:e} in noise coefficients")]
    NegativeRadicand(f64),

    #[error("syntax error on line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("unknown field `{0}`")]
    UnknownField(String),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("degenerate fit: {0}")]
    DegenerateFit(&'static str),

    #[error("nonpositive value {0} in power-law fit")]
    NonPositive(f64),

    #[error("mismatched grids: {0}")]
    MismatchedGrid(String),

    #[error("non-finite state on path {path} at t = {time}")]
    NonFiniteState { path: u64, time: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command-line tool: 1 for configuration
    /// problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFiniteState { .. } | Error::NonFiniteCoefficient(_) | Error::NegativeRadicand(_) => 2,
            _ => 1,
        }
    }
}
