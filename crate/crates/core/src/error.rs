use thiserror::Error;

/// Errors raised anywhere in the density pipeline.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("polynomial is not Eisenstein over the unramified subring: {0}")]
    NonEisenstein(String),
    #[error("polynomial is reducible modulo p: {0}")]
    ReduciblePolynomial(String),
    #[error("invalid ring parameters: {0}")]
    InvalidRing(String),
    #[error("attempted to invert a non-unit")]
    NonUnitInverse,
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("lattice is not a sublattice: {0}")]
    NotSublattice(String),
    #[error("degenerate quadratic form")]
    DegenerateForm,
    #[error("lattice is rank deficient: {0}")]
    RankDeficient(String),
    #[error("additive kernel is not an A-module: {0}")]
    NotAModule(String),
    #[error("product escapes the stabilized lattice: {0}")]
    ClosureViolation(String),
    #[error("enumeration budget exceeded: {needed} points requested, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("residue map depends on the chosen lift: {0}")]
    LiftDependence(String),
    #[error("residue map does not preserve the residue form: {0}")]
    NotIsometry(String),
    #[error("naive density did not stabilize up to k = {0}")]
    NotStabilized(u32),
    #[error("parameters outside the closed-form family: {0}")]
    OutOfFamily(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
