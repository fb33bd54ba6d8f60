//! Substitutions and most general unifiers for function-free atoms.

use std::collections::BTreeMap;
use std::fmt;

use crate::model::{Atom, Clause, Literal, Query, Term, Var};

/// A finite idempotent mapping from variables to terms.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Substitution {
    map: BTreeMap<Var, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, v: &Var) -> Option<&Term> {
        self.map.get(v)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.map.iter()
    }

    pub fn contains(&self, v: &Var) -> bool {
        self.map.contains_key(v)
    }

    /// Resolve a term through the current bindings.
    pub fn walk(&self, t: &Term) -> Term {
        match t {
            Term::Var(v) => self.map.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Const(_) => t.clone(),
        }
    }

    /// A substitution whose pairs apply in one step: a target is never
    /// resolved through another pair, so renamings may swap names.
    pub fn simultaneous(pairs: impl IntoIterator<Item = (Var, Term)>) -> Substitution {
        let mut s = Substitution::new();
        for (v, t) in pairs {
            if t != Term::Var(v.clone()) {
                s.map.entry(v).or_insert(t);
            }
        }
        s
    }

    /// Bind `v` to `t`, keeping the substitution idempotent.
    ///
    /// Panics in debug builds if `v` is already bound.
    pub fn bind(&mut self, v: Var, t: Term) {
        debug_assert!(!self.map.contains_key(&v), "variable {v} bound twice");
        let t = self.walk(&t);
        if t == Term::Var(v.clone()) {
            return;
        }
        for existing in self.map.values_mut() {
            if *existing == Term::Var(v.clone()) {
                *existing = t.clone();
            }
        }
        self.map.insert(v, t);
    }

    /// Extend with a one-way match of `pattern` onto `target` (only variables of
    /// `pattern` may be bound). Returns false and leaves `self` unspecified
    /// on failure.
    pub fn match_atom(&mut self, pattern: &Atom, target: &Atom) -> bool {
        if pattern.pred != target.pred || pattern.args.len() != target.args.len() {
            return false;
        }
        for (p, t) in pattern.args.iter().zip(&target.args) {
            match p {
                Term::Const(_) => {
                    if p != t {
                        return false;
                    }
                }
                Term::Var(v) => match self.map.get(v) {
                    Some(bound) => {
                        if bound != t {
                            return false;
                        }
                    }
                    None => {
                        self.map.insert(v.clone(), t.clone());
                    }
                },
            }
        }
        true
    }

    /// The composition `self` then `other`: applying the result equals
    /// applying `self` and then `other`.
    pub fn compose(&self, other: &Substitution) -> Substitution {
        let mut map: BTreeMap<Var, Term> = self.map.iter().map(|(v, t)| (v.clone(), t.apply(other))).collect();
        for (v, t) in &other.map {
            map.entry(v.clone()).or_insert_with(|| t.clone());
        }
        map.retain(|v, t| *t != Term::Var(v.clone()));
        Substitution { map }
    }

    /// Restrict to the given variables.
    pub fn restrict(&self, vars: &[Var]) -> Substitution {
        Substitution { map: self.map.iter().filter(|(v, _)| vars.contains(v)).map(|(v, t)| (v.clone(), t.clone())).collect() }
    }
}

impl FromIterator<(Var, Term)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (Var, Term)>>(iter: I) -> Self {
        let mut s = Substitution::new();
        for (v, t) in iter {
            if !s.contains(&v) {
                s.bind(v, t);
            }
        }
        s
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (v, t)) in self.map.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}/{t}")?;
        }
        write!(f, "}}")
    }
}

/// Anything a substitution can be applied to.
pub trait Apply: Sized {
    fn apply(&self, s: &Substitution) -> Self;
}

impl Apply for Term {
    fn apply(&self, s: &Substitution) -> Term {
        s.walk(self)
    }
}

impl Apply for Atom {
    fn apply(&self, s: &Substitution) -> Atom {
        Atom { pred: self.pred.clone(), args: self.args.iter().map(|t| t.apply(s)).collect() }
    }
}

impl Apply for Literal {
    fn apply(&self, s: &Substitution) -> Literal {
        Literal { positive: self.positive, atom: self.atom.apply(s) }
    }
}

impl Apply for Clause {
    fn apply(&self, s: &Substitution) -> Clause {
        Clause { head: self.head.as_ref().map(|h| h.apply(s)), body: self.body.apply(s) }
    }
}

impl<T: Apply> Apply for Vec<T> {
    fn apply(&self, s: &Substitution) -> Vec<T> {
        self.iter().map(|x| x.apply(s)).collect()
    }
}

impl<T: Apply> Apply for Option<T> {
    fn apply(&self, s: &Substitution) -> Option<T> {
        self.as_ref().map(|x| x.apply(s))
    }
}

impl<A: Apply, B: Apply> Apply for (A, B) {
    fn apply(&self, s: &Substitution) -> (A, B) {
        (self.0.apply(s), self.1.apply(s))
    }
}

impl Apply for Query {
    fn apply(&self, s: &Substitution) -> Query {
        let output_vars = self
            .output_vars
            .iter()
            .map(|v| match s.walk(&Term::Var(v.clone())) {
                Term::Var(w) => w,
                Term::Const(_) => v.clone(),
            })
            .collect();
        Query { name: self.name.clone(), output_vars, body: self.body.apply(s) }
    }
}

/// Apply `s` to any value.
pub fn apply_substitution<T: Apply>(e: &T, s: &Substitution) -> T {
    e.apply(s)
}

/// Extend `s` so that it unifies `a` and `b`.
pub fn unify_terms(s: &mut Substitution, a: &Term, b: &Term) -> bool {
    let a = s.walk(a);
    let b = s.walk(b);
    match (a, b) {
        (x, y) if x == y => true,
        (Term::Var(v), t) | (t, Term::Var(v)) => {
            s.bind(v, t);
            true
        }
        _ => false,
    }
}

/// Extend `s` with a unifier of two atoms.
pub fn unify_with(s: &mut Substitution, a: &Atom, b: &Atom) -> bool {
    a.pred == b.pred && a.args.len() == b.args.len() && a.args.iter().zip(&b.args).all(|(x, y)| unify_terms(s, x, y))
}

/// The most general unifier of two atoms, if any.
pub fn unify(a: &Atom, b: &Atom) -> Option<Substitution> {
    let mut s = Substitution::new();
    unify_with(&mut s, a, b).then_some(s)
}

/// Rename every variable of `c` to a fresh one.
pub fn rename_apart<T: Apply>(value: &T, vars: &[Var], gen: &mut crate::model::VarGen) -> (T, Substitution) {
    let s: Substitution = vars.iter().map(|v| (v.clone(), Term::Var(gen.fresh()))).collect();
    (value.apply(&s), s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn atom(p: &str, args: &[&str]) -> Atom {
        Atom::new(
            p,
            args.iter()
                .map(|a| if a.chars().next().unwrap().is_uppercase() { Term::var(a) } else { Term::sym(a) })
                .collect(),
        )
    }

    #[test]
    fn unify_direct_binding() {
        let s = unify(&atom("p", &["X", "a"]), &atom("p", &["b", "Y"])).unwrap();
        assert_eq!(s.get(&Var::new("X")), Some(&Term::sym("b")));
        assert_eq!(s.get(&Var::new("Y")), Some(&Term::sym("a")));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn unify_failures() {
        assert!(unify(&atom("p", &["X"]), &atom("q", &["X"])).is_none());
        assert!(unify(&atom("p", &["X", "X"]), &atom("p", &["a", "b"])).is_none());
    }

    #[test]
    fn apply_examples() {
        let s: Substitution = [(Var::new("X"), Term::sym("a"))].into_iter().collect();
        assert_eq!(atom("p", &["X", "Y"]).apply(&s), atom("p", &["a", "Y"]));
        assert_eq!(atom("p", &["X"]).apply(&Substitution::new()), atom("p", &["X"]));
        let c = Clause::new(Some(atom("q", &["X", "Y"])), vec![Literal::pos(atom("r", &["X"])), Literal::pos(atom("s", &["Y"]))]);
        let s: Substitution = [(Var::new("X"), Term::sym("a")), (Var::new("Y"), Term::sym("b"))].into_iter().collect();
        assert_eq!(c.apply(&s).to_string(), "q(a, b) :- r(a), s(b)");
    }

    #[test]
    fn chained_bindings_stay_idempotent() {
        let s = unify(&atom("p", &["X", "Y", "Y"]), &atom("p", &["Y", "Z", "c"])).unwrap();
        for (_, t) in s.iter() {
            assert_eq!(t, &Term::sym("c"));
        }
    }

    fn term_strategy() -> impl Strategy<Value = Term> {
        prop_oneof![
            prop::sample::select(vec!["X", "Y", "Z", "W"]).prop_map(Term::var),
            prop::sample::select(vec!["a", "b"]).prop_map(Term::sym),
        ]
    }

    fn atom_strategy() -> impl Strategy<Value = Atom> {
        prop::collection::vec(term_strategy(), 3).prop_map(|args| Atom::new("p", args))
    }

    fn ground_substitutions(vars: &[Var]) -> Vec<Substitution> {
        let mut out = vec![Substitution::new()];
        for v in vars {
            let mut next = Vec::new();
            for s in &out {
                for c in ["a", "b", "c"] {
                    let mut s2 = s.clone();
                    s2.bind(v.clone(), Term::sym(c));
                    next.push(s2);
                }
            }
            out = next;
        }
        out
    }

    proptest! {
        #[test]
        fn unifier_is_sound_idempotent_and_most_general(a in atom_strategy(), b in atom_strategy()) {
            let mut vars = a.vars();
            for v in b.vars() {
                if !vars.contains(&v) { vars.push(v); }
            }
            match unify(&a, &b) {
                Some(s) => {
                    prop_assert_eq!(a.apply(&s), b.apply(&s));
                    prop_assert_eq!(a.apply(&s).apply(&s), a.apply(&s));
                    for tau in ground_substitutions(&vars) {
                        if a.apply(&tau) == b.apply(&tau) {
                            // tau factors through s: tau = s followed by tau
                            for v in &vars {
                                let t = Term::Var(v.clone());
                                prop_assert_eq!(t.apply(&s).apply(&tau), t.apply(&tau));
                            }
                        }
                    }
                }
                None => {
                    for tau in ground_substitutions(&vars) {
                        prop_assert_ne!(a.apply(&tau), b.apply(&tau));
                    }
                }
            }
        }
    }

    #[test]
    fn simultaneous_renaming_can_swap() {
        let s = Substitution::simultaneous([(Var::new("X"), Term::var("Y")), (Var::new("Y"), Term::var("X"))]);
        let a = Atom::new("p", vec![Term::var("X"), Term::var("Y")]);
        assert_eq!(a.apply(&s), Atom::new("p", vec![Term::var("Y"), Term::var("X")]));
    }
}
