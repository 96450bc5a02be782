use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("operand spaces share labels: {0}")]
    OverlappingLabels(String),
    #[error("label {0} not present in operator space")]
    UnknownLabel(String),
    #[error("dimension mismatch for label {label}: {left} vs {right}")]
    DimensionMismatch {
        label: String,
        left: usize,
        right: usize,
    },
    #[error("matrix is {rows}x{cols} but the tensor space has dimension {dim}")]
    ShapeMismatch { rows: usize, cols: usize, dim: usize },
    #[error("duplicate label {0} in tensor space")]
    DuplicateLabel(String),
    #[error("label {0} has zero dimension")]
    ZeroDimension(String),
    #[error("operator is not Hermitian: deviation {0:.3e}")]
    NotHermitian(f64),
    #[error("party subset is empty")]
    EmptySubset,
    #[error("party {party} out of range for a {n}-party signature")]
    PartyOutOfRange { party: usize, n: usize },
    #[error("invalid probability table: {0}")]
    InvalidTable(String),
    #[error("not a valid channel: {0}")]
    InvalidChannel(String),
    #[error("channel is not parity-erasure: subset {subset:?} has residual {residual:.3e}")]
    NotParityErasure { subset: Vec<usize>, residual: f64 },
    #[error("no-influence condition fails at party {party}: residual {residual:.3e}")]
    NoInfluenceViolated { party: usize, residual: f64 },
    #[error("decomposition failed: {0}")]
    DecompositionFailed(String),
    #[error("scale cap exceeded: {0}")]
    ScaleCap(String),
    #[error("linear program failed: {0}")]
    LpFailure(String),
    #[error("malformed input: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
