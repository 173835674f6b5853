use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("ring error: {0}")]
    BadRing(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unsupported ring kind for this operation: {0}")]
    UnsupportedRing(String),

    #[error("composite of differentials is not zero at {0}")]
    CompositeNotZero(String),

    #[error("module mismatch between operands")]
    ModuleMismatch,

    #[error("bidegree mismatch: {0}")]
    BidegreeMismatch(String),

    #[error("window insufficient: {0}")]
    WindowInsufficient(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error at line {1}, column {2}: {0}")]
    Parse(String, usize, usize),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
