//! Ground belief logic programs, P-support and the enumeration model.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::builtin::eval_builtin;
use crate::error::{Error, Result};
use crate::model::{Atom, BeliefInterval, Literal};

use super::combine::Combination;
use super::formula::{Formula, Truth, TruthValuation};

/// Default bound on the number of atoms for the `3^n` enumeration.
pub const BRUTE_FORCE_CAP: usize = 16;

/// A ground annotated clause. Bodies hold database literals only: ground
/// built-ins are evaluated away when the clause is built.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundClause {
    pub id: String,
    pub head: Atom,
    pub body: Vec<Literal>,
    pub belief: BeliefInterval,
}

impl GroundClause {
    /// Build a ground clause, evaluating built-in body literals. Returns
    /// `None` when a built-in is false, since such a clause never fires.
    pub fn new(id: impl Into<String>, head: Atom, body: Vec<Literal>, belief: BeliefInterval) -> Result<Option<GroundClause>> {
        let mut kept = Vec::with_capacity(body.len());
        for lit in body {
            if lit.is_builtin() {
                if eval_builtin(&lit.atom)? != lit.positive {
                    return Ok(None);
                }
            } else if !lit.atom.is_ground() {
                return Err(Error::NonGroundBuiltin(format!("non-ground literal {lit} in a ground clause")));
            } else if !kept.contains(&lit) {
                kept.push(lit);
            }
        }
        if !head.is_ground() {
            return Err(Error::NonGroundBuiltin(format!("non-ground head {head} in a ground clause")));
        }
        Ok(Some(GroundClause { id: id.into(), head, body: kept, belief }))
    }

    pub fn fact(id: impl Into<String>, head: Atom, belief: BeliefInterval) -> GroundClause {
        GroundClause { id: id.into(), head, body: Vec::new(), belief }
    }
}

impl fmt::Display for GroundClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} {}", self.id, self.belief, self.head)?;
        if !self.body.is_empty() {
            write!(f, " :- ")?;
            for (i, l) in self.body.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{l}")?;
            }
        }
        Ok(())
    }
}

/// A finite set of ground annotated clauses.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundBlp {
    pub clauses: Vec<GroundClause>,
}

impl GroundBlp {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, c: GroundClause) {
        self.clauses.push(c);
    }

    /// Every atom mentioned, in sorted order.
    pub fn atoms(&self) -> Vec<Atom> {
        let mut set = BTreeSet::new();
        for c in &self.clauses {
            set.insert(c.head.clone());
            for l in &c.body {
                set.insert(l.atom.clone());
            }
        }
        set.into_iter().collect()
    }

    pub fn clauses_for<'a>(&'a self, head: &'a Atom) -> impl Iterator<Item = &'a GroundClause> + 'a {
        self.clauses.iter().filter(move |c| &c.head == head)
    }
}

impl FromIterator<GroundClause> for GroundBlp {
    fn from_iter<I: IntoIterator<Item = GroundClause>>(iter: I) -> Self {
        GroundBlp { clauses: iter.into_iter().collect() }
    }
}

/// Truth of a conjunctive body under a valuation.
pub(crate) fn body_truth(body: impl IntoIterator<Item = (Truth, bool)>) -> Truth {
    body.into_iter().map(|(t, positive)| if positive { t } else { !t }).min().unwrap_or(Truth::T)
}

/// `Val([v, w], tau)`.
pub fn val(b: BeliefInterval, tau: Truth) -> f64 {
    match tau {
        Truth::T => b.v,
        Truth::F => 1.0 - b.w,
        Truth::U => b.w - b.v,
    }
}

/// The P-support for `x` in `i`.
pub fn p_support(blp: &GroundBlp, i: &TruthValuation, x: &Atom, phi: Combination) -> Result<f64> {
    let tau = i.get(x).ok_or_else(|| Error::AtomOutsideBase(x.to_string()))?;
    let mut firing = Vec::new();
    for c in blp.clauses_for(x) {
        let mut parts = Vec::with_capacity(c.body.len());
        for l in &c.body {
            let t = i.get(&l.atom).ok_or_else(|| Error::AtomOutsideBase(l.atom.to_string()))?;
            parts.push((t, l.positive));
        }
        if body_truth(parts) == Truth::T {
            firing.push(c.belief);
        }
    }
    Ok(val(phi.combine(&firing)?, tau))
}

/// The model of `f` by summing the support of every valuation that
/// satisfies it, with the default enumeration cap.
pub fn brute_force_model(blp: &GroundBlp, f: &Formula, phi: Combination) -> Result<f64> {
    brute_force_model_capped(blp, f, phi, BRUTE_FORCE_CAP)
}

/// A clause belief with its body as (atom index, sign) pairs.
type IndexedClause = (BeliefInterval, Vec<(usize, bool)>);

pub fn brute_force_model_capped(blp: &GroundBlp, f: &Formula, phi: Combination, cap: usize) -> Result<f64> {
    let mut base = blp.atoms();
    for a in f.atoms() {
        if !base.contains(a) {
            base.push(a.clone());
        }
    }
    let n = base.len();
    if n > cap {
        return Err(Error::CapExceeded { what: "brute-force valuation base", size: n, cap });
    }
    let index: HashMap<&Atom, usize> = base.iter().enumerate().map(|(i, a)| (a, i)).collect();
    // clauses grouped by head, bodies as (atom index, sign)
    let mut by_head: Vec<Vec<IndexedClause>> = vec![Vec::new(); n];
    for c in &blp.clauses {
        let body = c.body.iter().map(|l| (index[&l.atom], l.positive)).collect();
        by_head[index[&c.head]].push((c.belief, body));
    }
    let mut values = vec![Truth::F; n];
    let mut total = 0.0;
    let mut firing = Vec::new();
    loop {
        let mut support = 1.0;
        for x in 0..n {
            firing.clear();
            for (b, body) in &by_head[x] {
                if body_truth(body.iter().map(|&(i, s)| (values[i], s))) == Truth::T {
                    firing.push(*b);
                }
            }
            support *= val(phi.combine(&firing)?, values[x]);
            if support == 0.0 {
                break;
            }
        }
        if support > 0.0 && f.eval_with(&|a| index.get(a).map(|&i| values[i]))? == Truth::T {
            total += support;
        }
        // advance the base-3 counter
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(total);
            }
            values[pos] = match values[pos] {
                Truth::F => Truth::U,
                Truth::U => Truth::T,
                Truth::T => Truth::F,
            };
            if values[pos] != Truth::F {
                break;
            }
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(p: &str) -> Atom {
        Atom::new(p, vec![])
    }

    fn fact(id: &str, p: &str, v: f64) -> GroundClause {
        GroundClause::fact(id, a(p), BeliefInterval::point(v))
    }

    #[test]
    fn p_support_examples() {
        let empty = GroundBlp::new();
        let i: TruthValuation = [(a("x"), Truth::U)].into_iter().collect();
        assert_eq!(p_support(&empty, &i, &a("x"), Combination::Dempster).unwrap(), 1.0);
        let blp: GroundBlp = [fact("f", "x", 0.8)].into_iter().collect();
        let t: TruthValuation = [(a("x"), Truth::T)].into_iter().collect();
        let f: TruthValuation = [(a("x"), Truth::F)].into_iter().collect();
        assert!((p_support(&blp, &t, &a("x"), Combination::Max).unwrap() - 0.8).abs() < 1e-12);
        assert!((p_support(&blp, &f, &a("x"), Combination::Max).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn brute_force_examples() {
        let blp: GroundBlp = [fact("f", "a", 1.0)].into_iter().collect();
        assert_eq!(brute_force_model(&blp, &Formula::atom(a("a")), Combination::Dempster).unwrap(), 1.0);

        let mut chain = GroundBlp::new();
        chain.push(fact("f", "a", 1.0));
        chain.push(GroundClause::new("r", a("b"), vec![Literal::pos(a("a"))], BeliefInterval::point(0.8)).unwrap().unwrap());
        let b = brute_force_model(&chain, &Formula::atom(a("b")), Combination::Dempster).unwrap();
        assert!((b - 0.8).abs() < 1e-12);

        let two: GroundBlp = [fact("r1", "x", 0.4), fact("r2", "x", 0.8)].into_iter().collect();
        let x = brute_force_model(&two, &Formula::atom(a("x")), Combination::Dempster).unwrap();
        assert!((x - 8.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn adding_weak_evidence_lowers_belief() {
        let strong: GroundBlp = [fact("r2", "x", 0.8)].into_iter().collect();
        let both: GroundBlp = [fact("r1", "x", 0.4), fact("r2", "x", 0.8)].into_iter().collect();
        let fx = Formula::atom(a("x"));
        let before = brute_force_model(&strong, &fx, Combination::Dempster).unwrap();
        let after = brute_force_model(&both, &fx, Combination::Dempster).unwrap();
        assert!((before - 0.8).abs() < 1e-12);
        assert!(after < before);
    }

    #[test]
    fn false_builtin_drops_the_clause() {
        use crate::model::{CmpOp, Term};
        let lt = Literal::pos(Atom::cmp(CmpOp::Lt, Term::int(5), Term::int(3)));
        assert!(GroundClause::new("r", a("b"), vec![lt], BeliefInterval::CERTAIN).unwrap().is_none());
    }

    #[test]
    fn cap_is_enforced() {
        let blp: GroundBlp = (0..5).map(|i| fact(&format!("f{i}"), &format!("p{i}"), 1.0)).collect();
        let err = brute_force_model_capped(&blp, &Formula::atom(a("p0")), Combination::Max, 4).unwrap_err();
        assert!(matches!(err, Error::CapExceeded { size: 5, cap: 4, .. }));
    }
}
