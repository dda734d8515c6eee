use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the crate. Matrix positions are reported 1-based as
/// `(row, column)`, i.e. `(destination, source)` for rate matrices.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("bad shape: {0}")]
    BadShape(String),
    #[error("negative rate at (row {0}, column {1})")]
    NegativeRate(usize, usize),
    #[error("nonzero diagonal rate at ({0}, {0})")]
    NonzeroDiagonal(usize),
    #[error("non-finite value at (row {0}, column {1})")]
    NonFinite(usize, usize),
    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("stationary state is not unique (null space dimension {0})")]
    NonUniqueStationary(usize),
    #[error("generator is numerically defective (eigenvector condition {0:.3e}); use RK4")]
    DefectiveGenerator(f64),
    #[error("linear solve failed (condition number {0:.3e})")]
    SolveFailed(f64),
    #[error("no convergence: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("bad axis: {0}")]
    BadAxis(String),
    #[error("degenerate denominator: stationary state is not unique")]
    DegenerateDenominator,
    #[error("a1·f1 = 0: no interior optimum of arousal")]
    ZeroRateProduct,
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::BadShape(_) => "BadShape",
            Error::NegativeRate(..) => "NegativeRate",
            Error::NonzeroDiagonal(_) => "NonzeroDiagonal",
            Error::NonFinite(..) => "NonFinite",
            Error::InvalidProbability(_) => "InvalidProbability",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonUniqueStationary(_) => "NonUniqueStationary",
            Error::DefectiveGenerator(_) => "DefectiveGenerator",
            Error::SolveFailed(_) => "SolveFailed",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::BadAxis(_) => "BadAxis",
            Error::DegenerateDenominator => "DegenerateDenominator",
            Error::ZeroRateProduct => "ZeroRateProduct",
            Error::DomainError(_) => "DomainError",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }

    /// True for failures of a numerical procedure on valid input, as opposed
    /// to invalid input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NonUniqueStationary(_)
                | Error::DefectiveGenerator(_)
                | Error::SolveFailed(_)
                | Error::NoConvergence { .. }
                | Error::DegenerateDenominator
                | Error::ZeroRateProduct
        )
    }
}
