use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("alphabet mismatch: {0} vs {1} variables")]
    AlphabetMismatch(usize, usize),
    #[error("arity mismatch: expected {expected} substitutions, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("variable index {index} out of range for {nvars} variables")]
    VariableOutOfRange { index: usize, nvars: usize },
    #[error("alphabet size must be positive")]
    EmptyAlphabet,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("not self-adjoint: {0}")]
    NotSelfAdjoint(String),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("word length {len} exceeds the enumeration cap {cap}")]
    LengthCap { len: usize, cap: usize },
    #[error("coefficients are not exact integers")]
    NotExact,
    #[error("trajectory diverged: {0}")]
    Divergence(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("no decay guarantee: {0}")]
    NoDecay(String),
    #[error("singular design: {0}")]
    Singular(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for aborts raised by numerical guards rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence(_) | Error::NoConvergence(_) | Error::NoDecay(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
