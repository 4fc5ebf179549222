use alloc::string::String;

use crate::jet::MAX_ORDER;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("division by a quantity that may vanish")]
    DivisionByZero,
    #[error("logarithm of a quantity that may be non-positive")]
    NonPositiveLog,
    #[error("derivative order {0} exceeds the supported maximum {MAX_ORDER}")]
    OrderTooHigh(usize),
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("syntax error at position {position}: {message}")]
pub struct ParseError {
    /// Byte offset into the source text.
    pub position: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("map {index} is not in the admissible class: {reason}")]
    InvalidMap { index: usize, reason: String },
    #[error("letter {letter} is outside the alphabet 1..={arity}")]
    LetterOutOfRange { letter: u32, arity: usize },
    #[error("{count} items exceed the size cap {cap}")]
    SizeLimit { count: u128, cap: u128 },
    #[error("enclosure tolerance not reached (width {width:e})")]
    ToleranceNotReached { width: f64 },
    #[error("no invariant envelope found")]
    EnvelopeNotFound,
    #[error("the attractor is a single point")]
    SingletonAttractor,
    #[error("eta too large: need 2*sqrt(eta) < 1")]
    EtaTooLarge,
    #[error("sup |f - g| = {observed:e} exceeds eta = {eta:e}")]
    SupExceedsEta { observed: f64, eta: f64 },
    #[error("systems have different numbers of maps ({0} vs {1})")]
    ArityMismatch(usize, usize),
    #[error("change of variables is not strictly monotone")]
    NotMonotone,
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("point selection exhausted: {0}")]
    SelectionExhausted(String),
    #[error("bump constraints infeasible: {0}")]
    ConstraintInfeasible(String),
    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
