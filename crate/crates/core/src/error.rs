use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("Hilbert-space dimension {dim} exceeds the cap {cap}; reduce the number of sites")]
    DimensionCapExceeded { dim: usize, cap: usize },

    #[error("site index {site} out of range for a lattice of {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("operator dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("algebra is not closed under commutation (residual {residual:.3e})")]
    AlgebraNotClosed { residual: f64 },

    #[error("element lies outside the span of the algebra basis (residual {residual:.3e})")]
    ProjectionFailure { residual: f64 },

    #[error("candidate Cartan elements {0} and {1} do not commute (norm {2:.3e})")]
    NotAbelian(usize, usize, f64),

    #[error("candidate Cartan subalgebra is not maximal: generator {extending} extends the abelian span")]
    NotMaximal { extending: usize },

    #[error("simultaneous diagonalization failed: {0}")]
    DegeneracyResolution(String),

    #[error("no commuting partition found: {0}")]
    PartitionNotFound(String),

    #[error("operator is not Hermitian (relative deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("eigensolver failure: {0}")]
    EigenSolver(String),

    #[error("theorem violation: {0}")]
    TheoremViolation(String),

    #[error("energy {target} lies outside the open spectral interval ({e_min}, {e_max})")]
    UnmatchableEnergy { target: f64, e_min: f64, e_max: f64 },

    #[error("bisection failed to converge: bracket [{lo}, {hi}], energy error {error:.3e}")]
    BisectionFailure { lo: f64, hi: f64, error: f64 },

    #[error("window holds {0} samples, at least 16 are required")]
    DegenerateWindow(usize),
}

impl Error {
    /// Numerical failures as opposed to bad inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenSolver(_)
                | Error::DegeneracyResolution(_)
                | Error::BisectionFailure { .. }
                | Error::UnmatchableEnergy { .. }
        )
    }
}
