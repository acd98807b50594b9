use thiserror::Error;

/// Errors raised by the toolkit. Variants group by what the caller did wrong.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("index out of range: {index} >= {bound}")]
    Index { index: usize, bound: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix not symmetric: max |A - A^T| = {0:e}")]
    Symmetry(f64),
    #[error("size guard exceeded: {what} = {actual} (limit {limit})")]
    Guard { what: &'static str, actual: u128, limit: u128 },
    #[error("photon-count mismatch: {0}")]
    Arity(String),
    #[error("odd photon number {0}; Gaussian outcomes come in pairs")]
    Parity(usize),
    #[error("parameter out of domain: {0}")]
    Parameter(String),
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("depth {depth} exceeds layer count {layers}")]
    Range { depth: usize, layers: usize },
    #[error("invalid state: {0}")]
    Validity(String),
    #[error("invalid partition: {0}")]
    Partition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for the resource-guard family (the CLI maps these to exit code 3).
    pub fn is_guard(&self) -> bool {
        matches!(self, Error::Guard { .. })
    }
}
