use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Validation,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("spin index {index} out of range for {n_spins} spins")]
    SpinIndex { index: usize, n_spins: usize },

    #[error("data spin index {index} out of range for {n_data} data spins")]
    DataIndex { index: usize, n_data: usize },

    #[error("control and target are the same spin ({0})")]
    SameSpin(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("operator is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("operator is not hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("deviation state has nonzero trace {0:.3e}")]
    NotTraceless(f64),

    #[error("invalid bit string {0:?}")]
    InvalidBits(String),

    #[error("bit string length {actual} does not match {expected} data spins")]
    BitLength { expected: usize, actual: usize },

    #[error("step index {n} out of range 1..={len}")]
    StepIndex { n: usize, len: usize },

    #[error("grid of {slices} slices is too coarse for winding {winding} (need at least {required})")]
    GridTooCoarse { slices: usize, winding: i64, required: usize },

    #[error("no J coupling between {0} and {1}")]
    ZeroCoupling(String, String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed pulse sequence: {0}")]
    Sequence(String),

    #[error("numerical check failed: {0}")]
    Numerical(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Sequence(_) => ErrorClass::Config,
            Error::NotUnitary(_) | Error::NotHermitian(_) | Error::NotTraceless(_) | Error::Numerical(_) => {
                ErrorClass::Numerical
            }
            _ => ErrorClass::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
