use thiserror::Error;

/// Errors raised by the library. Report-style operations (probes, path checks,
/// gap bounds) never return these; they record failures in their reports.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operator is not monotone: symmetric part has eigenvalue {min_eigenvalue:e}")]
    NotMonotone { min_eigenvalue: f64 },

    #[error("non-finite value produced by {context}")]
    NonFiniteOutput { context: &'static str },

    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),

    #[error("AlphaTooSmall: alpha must exceed 1 (got {0})")]
    AlphaTooSmall(f64),

    #[error("ExponentRange: need q > 0, s > 0 and 0 < q + s < 1 (got q = {q}, s = {s})")]
    ExponentRange { q: f64, s: f64 },

    #[error("TikhonovBound: c = {c} must be below {bound}")]
    TikhonovBound { c: f64, bound: f64 },

    #[error("NonPositive: {name} must be positive (got {value})")]
    NonPositive { name: &'static str, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("StepSizeUnderflow at t = {t}: step {h:e} too small")]
    StepSizeUnderflow { t: f64, h: f64, last_state: Vec<f64> },

    #[error("NonFiniteState at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("step limit of {max_steps} reached at t = {t}")]
    StepLimit { t: f64, max_steps: u64 },

    #[error("InsufficientSamples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("NoProgress: backtracking floor reached with residual {residual:e}")]
    NoProgress { residual: f64 },

    #[error("MaxIterations: {iterations} iterations, residual {residual:e}")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("ContinuationStalled at eps = {eps:e}: step difference {difference:e}")]
    ContinuationStalled { eps: f64, difference: f64 },

    #[error("no known solution set: {0}")]
    NoSolutionSet(String),

    #[error("InfeasibleConstants: {0}")]
    InfeasibleConstants(String),

    #[error("NotCertified: {0}")]
    NotCertified(String),

    #[error("EmptyWindow: fewer than {needed} positive samples in [{lo}, {hi}]")]
    EmptyWindow { lo: f64, hi: f64, needed: usize },

    #[error("AllZero: quantity vanishes identically on [{lo}, {hi}]")]
    AllZero { lo: f64, hi: f64 },

    #[error("Infeasible: constraint residual {residual:e}")]
    Infeasible { residual: f64 },

    #[error("MissingColumn: {0}")]
    MissingColumn(String),

    #[error("EmptyData: {0}")]
    EmptyData(String),

    #[error("problem file: {0}")]
    ProblemFile(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
