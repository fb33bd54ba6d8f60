//! Reasoning about comparison literals over a grounded body.
//!
//! The premises are the ground built-ins of a body whose variables were
//! replaced by fresh constants. Equality is handled with union-find and the
//! order relations by a transitive closure that also knows how the user
//! constants of the premises and of the question compare to each other.

use std::collections::HashMap;

use crate::builtin::eval_cmp;
use crate::model::{CmpOp, Const, Literal};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Entailed,
    Contradicted,
    Unknown,
}

/// A set of ground comparison facts.
#[derive(Clone, Debug, Default)]
pub struct Premises {
    facts: Vec<(CmpOp, Const, Const)>,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Edge {
    None,
    Weak,
    Strict,
}

impl Premises {
    /// Collect every ground built-in literal of `body`.
    pub fn from_body(body: &[Literal]) -> Premises {
        let mut p = Premises::default();
        for l in body {
            let Some(op) = l.atom.cmp_op() else { continue };
            if let (Some(a), Some(b)) = (l.atom.args[0].as_const(), l.atom.args[1].as_const()) {
                let op = if l.positive { op } else { op.negated() };
                p.facts.push((op, a.clone(), b.clone()));
            }
        }
        p
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Decide `a op b` from the premises.
    pub fn check(&self, op: CmpOp, a: &Const, b: &Const) -> Verdict {
        if !a.is_fresh() && !b.is_fresh() {
            return match eval_cmp(op, a, b) {
                Ok(true) => Verdict::Entailed,
                Ok(false) => Verdict::Contradicted,
                Err(_) => Verdict::Unknown,
            };
        }
        let Some(closure) = Closure::build(self, [a, b]) else { return Verdict::Unknown };
        let (x, y) = (closure.class(a), closure.class(b));
        if closure.holds(op, x, y) {
            Verdict::Entailed
        } else if closure.holds(op.negated(), x, y) {
            Verdict::Contradicted
        } else {
            Verdict::Unknown
        }
    }

    /// True when the premises themselves are contradictory.
    pub fn inconsistent(&self) -> bool {
        Closure::build(self, []).is_none()
    }
}

struct Closure {
    index: HashMap<Const, usize>,
    class_of: Vec<usize>,
    value: Vec<Option<Const>>,
    rel: Vec<Vec<Edge>>,
    ne: Vec<(usize, usize)>,
}

impl Closure {
    fn build<'a>(p: &Premises, extra: impl IntoIterator<Item = &'a Const>) -> Option<Closure> {
        let mut index: HashMap<Const, usize> = HashMap::new();
        let mut consts: Vec<Const> = Vec::new();
        let mut add = |c: &Const, index: &mut HashMap<Const, usize>| {
            if !index.contains_key(c) {
                index.insert(c.clone(), consts.len());
                consts.push(c.clone());
            }
        };
        for (_, a, b) in &p.facts {
            add(a, &mut index);
            add(b, &mut index);
        }
        for c in extra {
            add(c, &mut index);
        }
        let n = consts.len();

        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (op, a, b) in &p.facts {
            if *op == CmpOp::Eq {
                let (x, y) = (find(&mut parent, index[a]), find(&mut parent, index[b]));
                parent[x] = y;
            }
        }
        let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        let mut class_ids: HashMap<usize, usize> = HashMap::new();
        let class_of: Vec<usize> = roots
            .iter()
            .map(|r| {
                let k = class_ids.len();
                *class_ids.entry(*r).or_insert(k)
            })
            .collect();
        let m = class_ids.len();
        let mut value: Vec<Option<Const>> = vec![None; m];
        for (i, c) in consts.iter().enumerate() {
            if c.is_fresh() {
                continue;
            }
            match &value[class_of[i]] {
                Some(v) if v != c => return None,
                _ => value[class_of[i]] = Some(c.clone()),
            }
        }

        let mut rel = vec![vec![Edge::None; m]; m];
        let mut ne = Vec::new();
        for (op, a, b) in &p.facts {
            let (x, y) = (class_of[index[a]], class_of[index[b]]);
            match op {
                CmpOp::Lt => rel[x][y] = Edge::Strict,
                CmpOp::Gt => rel[y][x] = Edge::Strict,
                CmpOp::Le => rel[x][y] = rel[x][y].max(Edge::Weak),
                CmpOp::Ge => rel[y][x] = rel[y][x].max(Edge::Weak),
                CmpOp::Ne => ne.push((x, y)),
                CmpOp::Eq => {}
            }
        }
        for x in 0..m {
            for y in 0..m {
                if let (Some(a), Some(b)) = (&value[x], &value[y]) {
                    if eval_cmp(CmpOp::Lt, a, b).unwrap_or(false) {
                        rel[x][y] = Edge::Strict;
                    }
                }
            }
        }
        for k in 0..m {
            for i in 0..m {
                if rel[i][k] == Edge::None {
                    continue;
                }
                for j in 0..m {
                    if rel[k][j] == Edge::None {
                        continue;
                    }
                    let through = rel[i][k].max(rel[k][j]);
                    if through > rel[i][j] {
                        rel[i][j] = through;
                    }
                }
            }
        }
        if (0..m).any(|i| rel[i][i] == Edge::Strict) {
            return None;
        }
        let c = Closure { index, class_of, value, rel, ne };
        if c.ne.iter().any(|&(x, y)| c.holds(CmpOp::Eq, x, y)) {
            return None;
        }
        Some(c)
    }

    fn class(&self, c: &Const) -> usize {
        self.class_of[self.index[c]]
    }

    fn holds(&self, op: CmpOp, x: usize, y: usize) -> bool {
        let le = |a: usize, b: usize| a == b || self.rel[a][b] != Edge::None;
        match op {
            CmpOp::Eq => x == y || (le(x, y) && le(y, x)),
            CmpOp::Ne => {
                matches!((&self.value[x], &self.value[y]), (Some(a), Some(b)) if a != b)
                    || self.ne.iter().any(|&(a, b)| (a, b) == (x, y) || (a, b) == (y, x))
                    || self.rel[x][y] == Edge::Strict
                    || self.rel[y][x] == Edge::Strict
            }
            CmpOp::Lt => self.rel[x][y] == Edge::Strict,
            CmpOp::Gt => self.rel[y][x] == Edge::Strict,
            CmpOp::Le => le(x, y),
            CmpOp::Ge => le(y, x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Atom, Term};

    fn k(n: u32) -> Const {
        Const::Fresh(n)
    }

    fn lit(op: CmpOp, a: Const, b: Const) -> Literal {
        Literal::pos(Atom::cmp(op, Term::Const(a), Term::Const(b)))
    }

    #[test]
    fn equality_and_order_chains() {
        let p = Premises::from_body(&[
            lit(CmpOp::Eq, k(1), k(2)),
            lit(CmpOp::Lt, k(2), k(3)),
            lit(CmpOp::Le, k(3), k(4)),
        ]);
        assert_eq!(p.check(CmpOp::Lt, &k(1), &k(4)), Verdict::Entailed);
        assert_eq!(p.check(CmpOp::Ge, &k(1), &k(4)), Verdict::Contradicted);
        assert_eq!(p.check(CmpOp::Eq, &k(3), &k(4)), Verdict::Unknown);
        assert_eq!(p.check(CmpOp::Ne, &k(1), &k(3)), Verdict::Entailed);
    }

    #[test]
    fn numeric_bounds_imply_weaker_bounds() {
        let p = Premises::from_body(&[lit(CmpOp::Gt, k(1), Const::Int(5))]);
        assert_eq!(p.check(CmpOp::Gt, &k(1), &Const::Int(3)), Verdict::Entailed);
        assert_eq!(p.check(CmpOp::Le, &k(1), &Const::Int(4)), Verdict::Contradicted);
        assert_eq!(p.check(CmpOp::Gt, &k(1), &Const::Int(7)), Verdict::Unknown);
    }

    #[test]
    fn unique_names_for_symbols() {
        let p = Premises::from_body(&[lit(CmpOp::Eq, k(1), Const::sym("lp"))]);
        assert_eq!(p.check(CmpOp::Eq, &k(1), &Const::sym("lp")), Verdict::Entailed);
        assert_eq!(p.check(CmpOp::Eq, &k(1), &Const::sym("math")), Verdict::Contradicted);
        assert_eq!(p.check(CmpOp::Eq, &k(2), &Const::sym("lp")), Verdict::Unknown);
    }

    #[test]
    fn contradictory_premises_are_detected() {
        let p = Premises::from_body(&[lit(CmpOp::Lt, k(1), k(2)), lit(CmpOp::Lt, k(2), k(1))]);
        assert!(p.inconsistent());
        let q = Premises::from_body(&[lit(CmpOp::Eq, k(1), Const::Int(0)), lit(CmpOp::Eq, k(1), Const::Int(1))]);
        assert!(q.inconsistent());
        assert_eq!(q.check(CmpOp::Eq, &k(1), &Const::Int(0)), Verdict::Unknown);
    }
}
