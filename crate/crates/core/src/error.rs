use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("Bessel order {twice_order}/2 exceeds the supported cap of 15")]
    UnsupportedOrder { twice_order: u32 },

    #[error("no sign change found while bracketing zero #{index} of J_{twice_order}/2")]
    BracketFailure { twice_order: u32, index: usize },

    #[error(
        "adaptive quadrature did not converge (estimate {estimate}, last error {error_estimate})"
    )]
    Quadrature { estimate: f64, error_estimate: f64 },

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("degenerate triangle {index} (signed area {area})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("no free degrees of freedom left after applying Dirichlet constraints")]
    EmptyFreeSet,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("mass matrix is not positive definite (pivot {pivot} at row {row})")]
    IndefiniteMass { row: usize, pivot: f64 },

    #[error(
        "eigensolver did not converge in {iterations} iterations (best residual {best_residual:e})"
    )]
    NotConverged {
        iterations: usize,
        best_residual: f64,
    },

    #[error("symmetric mesh pairing is required for parity classification")]
    MissingPairing,

    #[error("tip fit rejected: rms {rms:e} exceeds 5% of coefficient {coefficient:e}")]
    RejectedFit { coefficient: f64, rms: f64 },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
