use thiserror::Error;

use crate::model::BeliefInterval;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("ill-formed belief interval [{v}, {w}]")]
    BadInterval { v: f64, w: f64 },

    #[error("Dempster combination is undefined for {left} and {right} (K = 0)")]
    DempsterDegenerate { left: BeliefInterval, right: BeliefInterval },

    #[error("combination function does not map [1,1],[1,1] to [1,1]")]
    BadCombination,

    #[error("atom {0} is outside the valuation base")]
    AtomOutsideBase(String),

    #[error("{what} has {size} elements, above the enumeration cap of {cap}")]
    CapExceeded { what: &'static str, size: usize, cap: usize },

    #[error("dependency cycle through {0}")]
    Cycle(String),

    #[error("goal {0} is not a node of the dependency graph")]
    GoalAbsent(String),

    #[error("built-in {0} reached with non-ground arguments")]
    NonGroundBuiltin(String),

    #[error("cannot compare {left} with {right}: symbol and integer")]
    TypeMismatch { left: String, right: String },

    #[error("residue for {0} still has a body")]
    ResidueBodyNonEmpty(String),

    #[error("{0} is not an answer of the rewritten query")]
    NotAnAnswer(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("arity mismatch: {0}")]
    ArityMismatch(String),

    #[error("negated intensional literal {0} is not supported")]
    NegatedIntensional(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid database: {}", .0.join("; "))]
    Invalid(Vec<String>),

    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
