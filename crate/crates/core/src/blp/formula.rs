//! Three-valued truth valuations and Boolean formulas over ground atoms.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::Atom;

/// Truth values ordered `F < U < T`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Truth {
    F,
    U,
    T,
}

impl Truth {
    pub const ALL: [Truth; 3] = [Truth::F, Truth::U, Truth::T];
}

impl std::ops::Not for Truth {
    type Output = Truth;

    fn not(self) -> Truth {
        match self {
            Truth::T => Truth::F,
            Truth::F => Truth::T,
            Truth::U => Truth::U,
        }
    }
}

/// A total assignment of truth values to a finite base of ground atoms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TruthValuation {
    pub assignment: BTreeMap<Atom, Truth>,
}

impl TruthValuation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, atom: Atom, value: Truth) {
        self.assignment.insert(atom, value);
    }

    pub fn get(&self, atom: &Atom) -> Option<Truth> {
        self.assignment.get(atom).copied()
    }
}

impl FromIterator<(Atom, Truth)> for TruthValuation {
    fn from_iter<I: IntoIterator<Item = (Atom, Truth)>>(iter: I) -> Self {
        TruthValuation { assignment: iter.into_iter().collect() }
    }
}

/// A Boolean combination of ground atoms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    Atom(Atom),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    pub fn atom(a: Atom) -> Formula {
        Formula::Atom(a)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Formula::Atom(a) => {
                if !out.contains(&a) {
                    out.push(a)
                }
            }
            Formula::Not(f) => f.collect_atoms(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_atoms(out)),
        }
    }

    /// Evaluate with an arbitrary lookup, used by the enumeration loops.
    pub(crate) fn eval_with(&self, lookup: &impl Fn(&Atom) -> Option<Truth>) -> Result<Truth> {
        Ok(match self {
            Formula::Atom(a) => lookup(a).ok_or_else(|| Error::AtomOutsideBase(a.to_string()))?,
            Formula::Not(f) => !f.eval_with(lookup)?,
            Formula::And(fs) => {
                let mut acc = Truth::T;
                for f in fs {
                    acc = acc.min(f.eval_with(lookup)?);
                }
                acc
            }
            Formula::Or(fs) => {
                let mut acc = Truth::F;
                for f in fs {
                    acc = acc.max(f.eval_with(lookup)?);
                }
                acc
            }
        })
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join(f: &mut fmt::Formatter<'_>, fs: &[Formula], sep: &str, empty: &str) -> fmt::Result {
            if fs.is_empty() {
                return f.write_str(empty);
            }
            write!(f, "(")?;
            for (i, x) in fs.iter().enumerate() {
                if i > 0 {
                    f.write_str(sep)?;
                }
                write!(f, "{x}")?;
            }
            write!(f, ")")
        }
        match self {
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(x) => write!(f, "¬{x}"),
            Formula::And(fs) => join(f, fs, " ∧ ", "true"),
            Formula::Or(fs) => join(f, fs, " ∨ ", "false"),
        }
    }
}

/// Evaluate `f` in Lukasiewicz three-valued logic.
pub fn eval_formula(i: &TruthValuation, f: &Formula) -> Result<Truth> {
    f.eval_with(&|a| i.get(a))
}
