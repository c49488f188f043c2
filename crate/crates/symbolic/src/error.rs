use thiserror::Error;

/// Failures raised by the symbolic engine and its numeric companions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymbolicError {
    /// Two sums would bind the same index, or a factor would be captured
    /// by a sum that binds one of its indices.
    #[error("index collision on index {index}: {context}")]
    IndexCollision { index: i64, context: String },
    /// A sum body has no power series in r0 about 0.
    #[error("series expansion failed: {0}")]
    SeriesFailure(String),
    /// The constant-elimination equation is not linear in its unknown.
    #[error("equation is not solvable for z_{index}: {reason}")]
    NonSolvable { index: i64, reason: String },
    /// Numeric evaluation met a symbol it cannot assign a value to.
    #[error("unbound symbol {0}")]
    UnboundSymbol(String),
    /// The fixed-point iteration did not reach its tolerance.
    #[error("fixed-point iteration did not converge after {sweeps} sweeps (residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },
    /// Arguments outside the supported range of an operation.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, SymbolicError>;
