use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix {index} is not unitary (residual {residual:.3e})")]
    NonUnitary { index: usize, residual: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("operation supports q = 2 only, got q = {0}")]
    UnsupportedDimension(usize),
    #[error("reachable set exceeded the cap of {cap} elements at T = {t}")]
    ExplosionGuard { cap: usize, t: usize },
    #[error("need at least {needed} time points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("covering resolution must lie in (0, pi/2], got {0}")]
    DeltaOutOfRange(f64),
    #[error("an updated group element fell outside the supplied outgoing set")]
    InconsistentReachableSets,
    #[error("influence matrix norm {0:.3e} is too small to normalize")]
    DegenerateNorm(f64),
    #[error("channel is not trace preserving (residual {0:.3e})")]
    NonTracePreserving(f64),
    #[error("steady state did not converge within {0} iterations")]
    NonConvergentSteadyState(usize),
    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("estimated size {needed} exceeds the cap {cap}")]
    TooLarge { needed: usize, cap: usize },
    #[error("not a density matrix: {0}")]
    NotADensityMatrix(String),
    #[error("all branch weights vanish")]
    AllZeroWeights,
    #[error("mixing rate must lie in [0, 1], got {0}")]
    POutOfRange(f64),
    #[error("chain length must be even, got {0}")]
    OddL(usize),
    #[error("need at least 3 levels, got {0}")]
    TooFewLevels(usize),
    #[error("effective state requires uniform alpha and D = q")]
    NonUniformAlpha,
    #[error("bipartite dims {0}x{1} do not match matrix size {2}")]
    BadDims(usize, usize, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

impl Error {
    /// True for errors raised by size or memory guards rather than bad input.
    pub fn is_resource_guard(&self) -> bool {
        matches!(self, Error::ExplosionGuard { .. } | Error::TooLarge { .. })
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
