//! Belief logic programs: combination functions, three-valued valuations,
//! the enumeration model, proof DAGs and SLD answering.

pub mod combine;
pub mod dag;
pub mod formula;
pub mod ground;
pub mod sld;

pub use combine::Combination;
pub use dag::{belief_of, build_dependency_dag, build_proof_dag, ground_belief, DependencyDag, ProofDag, RNode};
pub use formula::{eval_formula, Formula, Truth, TruthValuation};
pub use ground::{brute_force_model, brute_force_model_capped, p_support, val, GroundBlp, GroundClause, BRUTE_FORCE_CAP};
pub use sld::{sld_answers, Blp, BlpClause, SldAnswer, SldTree};
