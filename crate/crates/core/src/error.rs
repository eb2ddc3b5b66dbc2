use thiserror::Error;

use crate::general::ReductionTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid backend configuration: {0}")]
    Config(String),

    #[error("structural mismatch: {0}")]
    Structural(String),

    #[error("operation not supported on this backend: {0}")]
    UnsupportedBackend(String),

    #[error("element not invertible: |a| = {magnitude:e} at sample {index}")]
    NotInvertible { index: usize, magnitude: f64 },

    #[error("numerical failure at sample {index}: {message}")]
    Numerical { index: usize, message: String },

    #[error("0 lies within {distance:e} of the spectrum (resolution {resolution:e}); refine or reject")]
    Ambiguous { distance: f64, resolution: f64 },

    #[error("path undersampled: phase increment {increment:.3} rad after sample {index}")]
    Undersampled { index: usize, increment: f64 },

    #[error("winding number {turns} around a sampled loop; no continuous logarithm")]
    NonzeroWinding { turns: i64 },

    #[error("path value vanishes at sample {index}")]
    ZeroOnPath { index: usize },

    #[error("no ray from 0 clears the spectrum")]
    NoRayFound,

    #[error("spectrum touches the branch cut at sample {index}")]
    BranchViolation { index: usize },

    #[error("0 is not in the unbounded component of the spectrum complement")]
    NotInSigmaN,

    #[error("matrix is not unipotent: max |(A-I)^n| = {deviation:e}")]
    NotUnipotent { deviation: f64 },

    #[error("diagonal product deviates from 1 by {deviation:e}")]
    ProductNotOne { deviation: f64 },

    #[error("matrix is not diagonal")]
    NotDiagonal,

    #[error("matrix is not triangular")]
    NotTriangular,

    #[error("epsilon {epsilon} must satisfy 0 < epsilon < sin(pi/n) = {bound}")]
    InvalidEpsilon { epsilon: f64, bound: f64 },

    #[error("{schedule} schedule exhausted without an admissible value")]
    ScheduleExhausted { schedule: &'static str },

    #[error("residual factor is not unipotent (deviation {deviation:e})")]
    NonUnipotentResult { deviation: f64 },

    #[error("shift search exhausted; best clearance {best_clearance:e}")]
    SearchExhausted { best_clearance: f64 },

    #[error("entries share a zero at sample {index}")]
    CommonZero { index: usize },

    #[error("column is not left-invertible: all entries vanish at sample {index}")]
    NotLeftInvertible { index: usize },

    #[error("all entries below the first vanish")]
    AllLowerEntriesZero,

    #[error("matrix has no nonzero entry below the diagonal")]
    NoLowerEntry,

    #[error("top-left entry is not in Exp1")]
    TopLeftNotExp1,

    #[error("ill-conditioned block solve (condition estimate {condition:e}) at sample {index}")]
    SolveFailure { index: usize, condition: f64 },

    #[error("determinant is not in Exp1")]
    DetNotExp1,

    #[error("factors do not alternate between upper and lower unitriangular")]
    NotAlternating,

    #[error("factor {index} is not unitriangular")]
    NotUnitriangular { index: usize },

    #[error("backend is not a finite point set")]
    NotFinitePoints,

    #[error("matrix is singular at point {index}")]
    NotInvertibleAtPoint { index: usize },

    #[error("too few samples: need at least {required}, got {actual}")]
    TooFewSamples { required: usize, actual: usize },

    #[error("pipeline failed: {source}")]
    Pipeline {
        #[source]
        source: Box<Error>,
        trace: Box<ReductionTrace>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Strips a `Pipeline` wrapper, returning the underlying failure.
    pub fn root(&self) -> &Error {
        match self {
            Error::Pipeline { source, .. } => source.root(),
            other => other,
        }
    }
}
