//! Error types shared across the crate.

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {0} too low: transient regime requires d >= 3")]
    DimensionTooLow(usize),
    #[error("asymmetric step: offset {0:?} has no mirror with matching probability")]
    AsymmetricStep(Vec<i64>),
    #[error("bad probability mass: {0}")]
    BadProbabilityMass(String),
    #[error("degenerate lattice: support generates a sublattice of index {index}")]
    DegenerateLattice { index: u128 },
    #[error("malformed walk specification: {0}")]
    MalformedSpec(String),

    #[error("tolerance unachievable at x={x:?}: requested {requested:e}, achievable {achievable:e}")]
    ToleranceUnachievable { x: Vec<i64>, requested: f64, achievable: f64 },
    #[error("offset must be nonzero")]
    ZeroOffset,

    #[error("Jacobi eigensolver failed to converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("lambda {0} is not above one")]
    LambdaNotAboveOne(f64),
    #[error("site set must contain the origin")]
    OriginNotInSet,

    #[error("excessive truncation: fraction {fraction:e} of walks hit the step cap; raise step_cap")]
    ExcessiveTruncation { fraction: f64 },
    #[error("insufficient tail mass on the fit window [{u_min}, {u_max}]")]
    InsufficientTailMass { u_min: u64, u_max: u64 },
    #[error("memory budget exceeded: {0}")]
    MemoryBudgetExceeded(String),

    #[error("empty lattice cover at epsilon {epsilon}")]
    EmptyCover { epsilon: f64 },
    #[error("power iteration stalled after {iterations} iterations")]
    PowerIterationStall { iterations: usize },
    #[error("Bessel root not bracketed while scanning up to {limit}")]
    RootNotBracketed { limit: f64 },
    #[error("potential density is singular at the origin")]
    OriginSingularity,
    #[error("walk covariance is not a multiple of the identity; rescaled comparison undefined")]
    AnisotropicWalk,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Numeric failures exit with status 3; everything else is a validation
    /// error and exits with status 2.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::ToleranceUnachievable { .. }
                | Error::NoConvergence { .. }
                | Error::LambdaNotAboveOne(_)
                | Error::ExcessiveTruncation { .. }
                | Error::InsufficientTailMass { .. }
                | Error::MemoryBudgetExceeded(_)
                | Error::PowerIterationStall { .. }
                | Error::RootNotBracketed { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
