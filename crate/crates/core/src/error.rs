use thiserror::Error;

/// Errors raised by the numerical library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("pfaffian undefined for odd dimension {0}")]
    OddPfaffian(usize),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not antisymmetric: |a[{i}][{j}] + a[{j}][{i}]| = {defect:e}")]
    NotAntisymmetric { i: usize, j: usize, defect: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("family truncated by support: order {order} requested, support has {support} points")]
    TruncatedBySupport { order: usize, support: usize },
    #[error("kernel/measure mismatch: {0}")]
    KernelMeasureMismatch(String),
    #[error("degenerate skew moment matrix at pair {0}")]
    DegenerateSkewMoments(usize),
    #[error("unlisted classical combination: {0}")]
    UnlistedCombination(String),
    #[error("zero diagonal in triangular expansion at row {0}")]
    ZeroDiagonal(usize),
    #[error("increase J_max: spectral tail {tail:e} exceeds tolerance {tol:e}")]
    IncreaseJmax { tail: f64, tol: f64 },
    #[error("odd-N normalization vanishes; choose different f")]
    OddNormalizationVanishes,
    #[error("point {x} outside the support of slice {slice}")]
    OutsideSupport { slice: usize, x: f64 },
    #[error("singular pairing moment matrix at order {0}")]
    SingularPairing(usize),
    #[error("not self-dual: degenerate pair mismatch {0:e}")]
    NotSelfDual(f64),
    #[error("step too large: crossing persisted after {0} halvings")]
    StepTooLarge(usize),
    #[error("configuration too constrained: acceptance rate {0:e}")]
    TooConstrained(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
