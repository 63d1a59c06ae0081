use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("not a unit: {0}")]
    NonUnit(String),
    #[error("variable lists differ: {0:?} vs {1:?}")]
    VariableMismatch(Vec<String>, Vec<String>),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("inner series for `{0}` has a nonzero constant term")]
    NonzeroConstant(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("fixed-point iteration did not converge (first unstable order {order})")]
    NoConvergence { order: u32 },
    #[error("linear part of the fixed-point map is not invertible")]
    SingularLinearPart,
    #[error("series is not divisible by {var}^{power}: offending monomial {monomial:?}")]
    NotDivisible { var: String, power: u32, monomial: Vec<u32> },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("exceptional infinite-type point: the |z|^2 coefficient vanishes")]
    ExceptionalPoint,
    #[error("Levi-flat input: defining series vanishes identically")]
    LeviFlat,
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("truncation too low: {0}")]
    Truncation(String),
    #[error("negative powers of w in the reduced system: {0}")]
    NegativePower(String),
    #[error("parameter budget exceeded at order {order} ({terms} terms)")]
    Budget { order: u32, terms: usize },
    #[error("numerical integration failed at x = {x}: {reason}")]
    Integration { x: f64, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
