use thiserror::Error;

use crate::seqnorms::SumSplit;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must have at least one row and one column")]
    EmptyShape,
    #[error("expected {expected} entries, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("matrix shapes differ within a sequence: {0:?} vs {1:?}")]
    SequenceShape((usize, usize), (usize, usize)),
    #[error("empty matrix sequence")]
    EmptySequence,
    #[error("matrix contains NaN or infinite entries")]
    NonFinite,
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("matrix is not Hermitian: ‖A − A*‖_F = {defect:.3e} exceeds tolerance")]
    NotHermitian { defect: f64 },
    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:.3e}")]
    NotPsd { eigenvalue: f64 },
    #[error("eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("norm diverges: p = ∞ requires q = ∞")]
    DivergentNorm,
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("optimizer budget exhausted; best cost {:.6e} with gap {:.3e}", .0.cost, .0.gap)]
    BudgetExhausted(Box<SumSplit>),
    #[error("t-grid too narrow: tail bound {tail:.3e} exceeds 10% of main term {main:.3e}")]
    InsufficientGrid { tail: f64, main: f64 },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("Schur multiplier is singular: min α_i + β_j = {0:.3e}")]
    SingularMultiplier(f64),
    #[error("exact sign enumeration supports at most 16 terms, got {0}")]
    TooManyTerms(usize),
    #[error("tensor dimension {0} exceeds the limit 4096")]
    DimensionTooLarge(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Recovers the best-so-far split carried by `BudgetExhausted`.
    pub fn into_best_split(self) -> std::result::Result<SumSplit, Error> {
        match self {
            Error::BudgetExhausted(s) => Ok(*s),
            e => Err(e),
        }
    }
}
