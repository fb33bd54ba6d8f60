//! Evaluation of the built-in comparison predicates over constants.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::model::{Atom, CmpOp, Const};

/// Order two constants. Integers compare numerically and symbols
/// lexicographically; comparing a symbol with an integer is a type error.
pub fn compare(a: &Const, b: &Const) -> Result<Ordering> {
    match (a, b) {
        (Const::Int(x), Const::Int(y)) => Ok(x.cmp(y)),
        (Const::Sym(x), Const::Sym(y)) => Ok(x.cmp(y)),
        _ => Err(Error::TypeMismatch { left: a.to_string(), right: b.to_string() }),
    }
}

/// Evaluate `a op b`. Equality and disequality follow the unique-name
/// assumption and accept constants of different types.
pub fn eval_cmp(op: CmpOp, a: &Const, b: &Const) -> Result<bool> {
    match op {
        CmpOp::Eq => Ok(a == b),
        CmpOp::Ne => Ok(a != b),
        _ => {
            let ord = compare(a, b)?;
            Ok(match op {
                CmpOp::Lt => ord == Ordering::Less,
                CmpOp::Gt => ord == Ordering::Greater,
                CmpOp::Le => ord != Ordering::Greater,
                CmpOp::Ge => ord != Ordering::Less,
                CmpOp::Eq | CmpOp::Ne => unreachable!(),
            })
        }
    }
}

/// Evaluate a ground built-in atom.
pub fn eval_builtin(atom: &Atom) -> Result<bool> {
    let op = atom.cmp_op().expect("eval_builtin on a database atom");
    match (atom.args[0].as_const(), atom.args[1].as_const()) {
        (Some(a), Some(b)) => eval_cmp(op, a, b),
        _ => Err(Error::NonGroundBuiltin(atom.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Term;

    #[test]
    fn integer_and_symbol_orders() {
        assert!(eval_cmp(CmpOp::Lt, &Const::Int(1), &Const::Int(3)).unwrap());
        assert!(eval_cmp(CmpOp::Ge, &Const::sym("b"), &Const::sym("a")).unwrap());
        assert!(!eval_cmp(CmpOp::Eq, &Const::sym("a"), &Const::Int(0)).unwrap());
        assert!(eval_cmp(CmpOp::Ne, &Const::sym("a"), &Const::Int(0)).unwrap());
        assert!(matches!(eval_cmp(CmpOp::Lt, &Const::sym("a"), &Const::Int(0)), Err(Error::TypeMismatch { .. })));
    }

    #[test]
    fn non_ground_is_an_error() {
        let a = Atom::cmp(CmpOp::Lt, Term::var("X"), Term::int(3));
        assert!(matches!(eval_builtin(&a), Err(Error::NonGroundBuiltin(_))));
    }
}
