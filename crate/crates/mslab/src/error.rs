use thiserror::Error;

/// Every failure the library reports. Variants map onto the error names used
/// in the documentation of each operation.
#[derive(Debug, Clone, Error)]
pub enum MsError {
    #[error("invalid dimension n={0} (need 2 <= n <= 8)")]
    InvalidDimension(usize),
    #[error("invalid parabolic k={k} for n={n} (need 1 <= k <= n-1)")]
    InvalidParabolic { n: usize, k: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("pole at {0}")]
    Pole(String),
    #[error("singular configuration: {0}")]
    SingularConfiguration(String),
    #[error("singular term ({w1}, {w2}): unmatched factors {factors:?}")]
    SingularTerm { w1: String, w2: String, factors: Vec<String> },
    #[error("epsilon extrapolation does not converge: estimates {a} and {b}")]
    DivergingLimit { a: String, b: String },
    #[error("perturbation failure: {0}")]
    PerturbationFailure(String),
    #[error("contour passes too close to a singular point at {0}")]
    ContourCollision(String),
    #[error("argument outside the strip of convergence: {0}")]
    OutOfStrip(String),
    #[error("window too wide for the Mellin bound: {0}")]
    WindowTooWide(String),
    #[error("asymptotic formula unreliable for k={0} < 10")]
    AsymptoticUnreliable(f64),
    #[error("quadrature failure near t={worst}: {detail}")]
    QuadratureFailure { worst: f64, detail: String },
    #[error("pipeline inconsistency: {0}")]
    PipelineInconsistency(String),
    #[error("contour schedule violation: {0}")]
    ScheduleViolation(String),
    #[error("adjacent zero indices {0} and {1} (impossible configuration)")]
    ImpossibilityViolation(usize, usize),
    #[error("singular factor: {0}")]
    SingularFactor(String),
    #[error("lemma check failed: slope {slope:.3} < 1.9; table {table:?}")]
    LemmaViolation { slope: f64, table: Vec<(f64, f64)> },
    #[error("cancellation failure: order {order:.3} < {needed:.3}; table {table:?}")]
    CancellationFailure { order: f64, needed: f64, table: Vec<(f64, f64)> },
    #[error("rank-deficient input: {0}")]
    RankError(String),
    #[error("candidate budget exceeded; try p <= {suggested_p:.3}")]
    BudgetError { suggested_p: f64 },
    #[error("Monte Carlo unreliable: only {0} effective samples")]
    McUnreliable(usize),
    #[error("size condition unsatisfied: lhs {lhs:.6e} <= rhs {rhs:.6e}")]
    ConditionUnsatisfied { lhs: f64, rhs: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, MsError>;
