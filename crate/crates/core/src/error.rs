use num_complex::Complex64;
use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("z = {0} lies on the open positive real axis")]
    Domain(Complex64),

    #[error("quadrature missed tolerance {tol:e} (error estimate {estimate:e})")]
    Quadrature { tol: f64, estimate: f64 },

    #[error("tabulated density piece has unspecified tail behaviour")]
    UnknownTail,

    #[error("function `{0}` has no representing measure (evaluation only)")]
    MeasureUnavailable(String),

    #[error("matrix is singular to working precision")]
    SingularMatrix,

    #[error("power iteration did not converge after {0} iterations")]
    Convergence(usize),

    #[error("nuclear norm is only defined for the l2 norm")]
    UnsupportedNorm,

    #[error("resolvent does not exist at z = {0}")]
    SpectrumHit(Complex64),

    #[error("resolvent bound is unbounded on the sampled half-line ({0})")]
    Unbounded(String),

    #[error("no admissible sector after {0} halvings")]
    NoSector(usize),

    #[error("A - B does not commute with R(t, B): defect {0:e}")]
    NotCommuting(f64),

    #[error("|lambda| = {lambda} is below the admissible radius {required}")]
    LambdaTooSmall { lambda: f64, required: f64 },

    #[error("factor {index} = {factor} left the open right half-plane")]
    BranchViolation { index: usize, factor: Complex64 },

    #[error("rank-one factor 1 - l(R v) vanishes")]
    DegenerateFactor,

    #[error("tail estimates disagree: {0:e}")]
    Tail(f64),

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("sequence does not converge: {0}")]
    NonConvergent(String),

    #[error("instance generation failed after {0} retries")]
    GenerationFailed(usize),

    #[error("point {0} is outside the validated domain")]
    OutsideDomain(Complex64),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
