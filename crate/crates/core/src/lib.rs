//! Approximate query answering for deductive databases with uncertain
//! integrity constraints.
//!
//! The crate rewrites conjunctive queries with residues of annotated
//! constraints and attaches belief-based lower bounds on the correctness and
//! completeness of every rewriting.

pub mod blp;
pub mod builtin;
pub mod compile;
pub mod error;
pub mod eval;
pub mod expand;
pub mod miner;
pub mod model;
pub mod session;
pub mod synth;
pub mod text;
pub mod transform;
pub mod unify;
pub mod validate;

pub use error::{Error, Result};
pub use model::{
    AnnotatedClause, Atom, BeliefInterval, Clause, ClauseKind, CmpOp, Const, Database, Literal, Query, SignedPred, Term,
    Var, VarGen,
};
