//! Exact query execution over materialized extensions.
//!
//! Conjunctive bodies are answered by a backtracking join that picks, at each
//! step, the positive literal with the fewest candidate rows given the
//! bindings so far. Built-ins and negated literals are checked as soon as
//! their arguments are bound.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::ops::{Bound, ControlFlow};
use std::sync::{Arc, OnceLock};

use crate::builtin::eval_cmp;
use crate::error::{Error, Result};
use crate::model::{CmpOp, Const, Database, Literal, Query, Term, Var};
use crate::validate::rule_strata;

/// The extension of one predicate with lazily built access paths.
#[derive(Debug)]
pub struct Relation {
    arity: usize,
    rows: Vec<Vec<Const>>,
    set: HashSet<Vec<Const>>,
    hash: Vec<OnceLock<HashMap<Const, Vec<u32>>>>,
    sorted: Vec<OnceLock<Vec<(Const, u32)>>>,
}

impl Relation {
    pub fn new(arity: usize) -> Relation {
        Relation {
            arity,
            rows: Vec::new(),
            set: HashSet::new(),
            hash: (0..arity).map(|_| OnceLock::new()).collect(),
            sorted: (0..arity).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<Const>] {
        &self.rows
    }

    pub fn contains(&self, row: &[Const]) -> bool {
        self.set.contains(row)
    }

    /// Add a row; returns false if it was already present.
    pub fn insert(&mut self, row: Vec<Const>) -> Result<bool> {
        if row.len() != self.arity {
            return Err(Error::ArityMismatch(format!("row of length {} for arity {}", row.len(), self.arity)));
        }
        if !self.set.insert(row.clone()) {
            return Ok(false);
        }
        self.rows.push(row);
        for h in &mut self.hash {
            h.take();
        }
        for s in &mut self.sorted {
            s.take();
        }
        Ok(true)
    }

    fn index(&self, pos: usize) -> &HashMap<Const, Vec<u32>> {
        self.hash[pos].get_or_init(|| {
            let mut m: HashMap<Const, Vec<u32>> = HashMap::new();
            for (i, r) in self.rows.iter().enumerate() {
                m.entry(r[pos].clone()).or_default().push(i as u32);
            }
            m
        })
    }

    /// Row numbers whose attribute `pos` equals `value`.
    pub fn lookup(&self, pos: usize, value: &Const) -> &[u32] {
        self.index(pos).get(value).map_or(&[], Vec::as_slice)
    }

    fn projection(&self, pos: usize) -> &[(Const, u32)] {
        self.sorted[pos].get_or_init(|| {
            let mut v: Vec<(Const, u32)> = self.rows.iter().enumerate().map(|(i, r)| (r[pos].clone(), i as u32)).collect();
            v.sort();
            v
        })
    }

    /// Row numbers whose attribute `pos` lies between the bounds, or `None`
    /// when the column mixes integers and symbols and a range scan could
    /// hide a type error.
    pub fn range(&self, pos: usize, lo: Bound<&Const>, hi: Bound<&Const>) -> Option<Vec<u32>> {
        let proj = self.projection(pos);
        let (first, last) = (proj.first()?, proj.last()?);
        if std::mem::discriminant(&first.0) != std::mem::discriminant(&last.0) {
            return None;
        }
        let start = match lo {
            Bound::Included(c) => proj.partition_point(|(x, _)| x < c),
            Bound::Excluded(c) => proj.partition_point(|(x, _)| x <= c),
            Bound::Unbounded => 0,
        };
        let end = match hi {
            Bound::Included(c) => proj.partition_point(|(x, _)| x <= c),
            Bound::Excluded(c) => proj.partition_point(|(x, _)| x < c),
            Bound::Unbounded => proj.len(),
        };
        Some(if start < end { proj[start..end].iter().map(|&(_, i)| i).collect() } else { Vec::new() })
    }
}

/// Materialized extensions of every predicate of a database.
#[derive(Debug, Default)]
pub struct ExtensionStore {
    relations: BTreeMap<Arc<str>, Relation>,
}

impl ExtensionStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Load the facts, then derive the intensional predicates bottom-up in
    /// dependency order (one pass per predicate suffices without recursion).
    pub fn from_database(db: &Database) -> Result<ExtensionStore> {
        let mut store = ExtensionStore::new();
        for (p, n) in db.predicate_arities() {
            store.relations.insert(p, Relation::new(n));
        }
        for a in db.fact_atoms() {
            let row = a.ground_args().ok_or_else(|| Error::Invalid(vec![format!("fact {a} is not ground")]))?;
            store.insert(&a.pred, row)?;
        }
        for pred in rule_strata(db) {
            let mut derived = Vec::new();
            for rule in db.rules_for(&pred) {
                let head = rule.head().expect("rules have heads");
                let vars = head.vars();
                for tuple in solutions(&rule.clause.body, &store, &vars)? {
                    let bind: HashMap<&Var, &Const> = vars.iter().zip(&tuple).collect();
                    let row = head
                        .args
                        .iter()
                        .map(|t| match t {
                            Term::Const(c) => c.clone(),
                            Term::Var(v) => bind[v].clone(),
                        })
                        .collect();
                    derived.push(row);
                }
            }
            for row in derived {
                store.insert(&pred, row)?;
            }
        }
        Ok(store)
    }

    pub fn insert(&mut self, pred: &str, row: Vec<Const>) -> Result<bool> {
        let n = row.len();
        let rel = self.relations.entry(Arc::from(pred)).or_insert_with(|| Relation::new(n));
        rel.insert(row)
    }

    pub fn relation(&self, pred: &str) -> Option<&Relation> {
        self.relations.get(pred)
    }

    pub fn contains(&self, pred: &str, row: &[Const]) -> bool {
        self.relations.get(pred).is_some_and(|r| r.contains(row))
    }

    pub fn size(&self, pred: &str) -> usize {
        self.relations.get(pred).map_or(0, Relation::len)
    }

    pub fn predicates(&self) -> impl Iterator<Item = &Arc<str>> {
        self.relations.keys()
    }

    /// Total number of stored tuples.
    pub fn total_rows(&self) -> usize {
        self.relations.values().map(Relation::len).sum()
    }
}

/// Extension sizes and available indexes, as seen by the rewriter.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct CostModel {
    pub extension_size: BTreeMap<Arc<str>, usize>,
    pub indexed_attrs: BTreeMap<Arc<str>, BTreeSet<usize>>,
    pub intensional: BTreeSet<Arc<str>>,
}

impl CostModel {
    pub fn size(&self, pred: &str) -> usize {
        self.extension_size.get(pred).copied().unwrap_or(0)
    }

    pub fn is_indexed(&self, pred: &str, pos: usize) -> bool {
        self.indexed_attrs.get(pred).is_some_and(|s| s.contains(&pos))
    }

    pub fn is_extensional(&self, pred: &str) -> bool {
        self.extension_size.contains_key(pred) && !self.intensional.contains(pred)
    }

    /// Sizes of the extensional predicates, ascending.
    pub fn extensional_sizes(&self) -> Vec<usize> {
        let mut v: Vec<usize> =
            self.extension_size.iter().filter(|(p, _)| !self.intensional.contains(*p)).map(|(_, &n)| n).collect();
        v.sort_unstable();
        v
    }

    pub fn set_size(&mut self, pred: &str, n: usize) {
        self.extension_size.insert(Arc::from(pred), n);
    }
}

/// Exact sizes of every predicate. Every attribute counts as indexed: the
/// store builds a hash index on first use of any position.
pub fn extension_stats(db: &Database, store: &ExtensionStore) -> CostModel {
    let mut cm = CostModel { intensional: db.intensional_preds(), ..CostModel::default() };
    for (p, n) in db.predicate_arities() {
        cm.extension_size.insert(p.clone(), store.size(&p));
        cm.indexed_attrs.insert(p, (0..n).collect());
    }
    cm
}

/// The answers of a query as a set of tuples over its output variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnswerSet {
    pub name: String,
    pub arity: usize,
    pub tuples: BTreeSet<Vec<Const>>,
}

impl AnswerSet {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        AnswerSet { name: name.into(), arity, tuples: BTreeSet::new() }
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn contains(&self, t: &[Const]) -> bool {
        self.tuples.contains(t)
    }
}

/// Answer `q` with the adaptive join order.
pub fn evaluate(q: &Query, store: &ExtensionStore) -> Result<AnswerSet> {
    let tuples = solutions(&q.body, store, &q.output_vars)?;
    Ok(AnswerSet { name: q.name.clone(), arity: q.output_vars.len(), tuples })
}

/// Answer `q` joining its positive database literals in the given order
/// (indices into the body). Literals missing from `order` are joined last.
pub fn evaluate_in_order(q: &Query, store: &ExtensionStore, order: &[usize]) -> Result<AnswerSet> {
    let mut tuples = BTreeSet::new();
    let _ = Solver::new(&q.body, store, Some(order)).run(&mut |b| {
        tuples.insert(project(b, &q.output_vars)?);
        Ok(ControlFlow::Continue(()))
    })?;
    Ok(AnswerSet { name: q.name.clone(), arity: q.output_vars.len(), tuples })
}

/// Distinct bindings of `vars` satisfying `body`.
pub fn solutions(body: &[Literal], store: &ExtensionStore, vars: &[Var]) -> Result<BTreeSet<Vec<Const>>> {
    let mut out = BTreeSet::new();
    for_each_solution(body, store, |b| {
        out.insert(project(b, vars)?);
        Ok(())
    })?;
    Ok(out)
}

/// Call `f` once per satisfying assignment of the variables of `body`.
pub fn for_each_solution(
    body: &[Literal],
    store: &ExtensionStore,
    mut f: impl FnMut(&Bindings) -> Result<()>,
) -> Result<()> {
    let _ = Solver::new(body, store, None).run(&mut |b| f(b).map(|()| ControlFlow::Continue(())))?;
    Ok(())
}

/// True when `body` has at least one solution.
pub fn satisfiable(body: &[Literal], store: &ExtensionStore) -> Result<bool> {
    let flow = Solver::new(body, store, None).run(&mut |_| Ok(ControlFlow::Break(())))?;
    Ok(flow.is_break())
}

fn project(b: &Bindings, vars: &[Var]) -> Result<Vec<Const>> {
    vars.iter()
        .map(|v| b.get(v).cloned().ok_or_else(|| Error::Config(format!("output variable {v} does not occur in the body"))))
        .collect()
}

/// A complete assignment produced by the join.
pub struct Bindings<'a> {
    names: &'a [Var],
    values: &'a [Option<Const>],
}

impl Bindings<'_> {
    pub fn get(&self, v: &Var) -> Option<&Const> {
        let i = self.names.iter().position(|n| n == v)?;
        self.values[i].as_ref()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Const)> {
        self.names.iter().zip(self.values).filter_map(|(n, v)| v.as_ref().map(|c| (n, c)))
    }
}

#[derive(Clone, Debug)]
enum Slot {
    Const(Const),
    Var(usize),
}

#[derive(Debug)]
struct Lit<'s> {
    positive: bool,
    op: Option<CmpOp>,
    pred: Arc<str>,
    args: Vec<Slot>,
    rel: Option<&'s Relation>,
}

type Visitor<'f> = dyn FnMut(&Bindings) -> Result<ControlFlow<()>> + 'f;

struct Solver<'s> {
    lits: Vec<Lit<'s>>,
    names: Vec<Var>,
    order: Option<Vec<usize>>,
}

impl<'s> Solver<'s> {
    fn new(body: &[Literal], store: &'s ExtensionStore, order: Option<&[usize]>) -> Solver<'s> {
        let mut names: Vec<Var> = Vec::new();
        let lits = body
            .iter()
            .map(|l| {
                let args = l
                    .atom
                    .args
                    .iter()
                    .map(|t| match t {
                        Term::Const(c) => Slot::Const(c.clone()),
                        Term::Var(v) => Slot::Var(match names.iter().position(|n| n == v) {
                            Some(i) => i,
                            None => {
                                names.push(v.clone());
                                names.len() - 1
                            }
                        }),
                    })
                    .collect();
                Lit {
                    positive: l.positive,
                    op: l.atom.cmp_op(),
                    pred: l.atom.pred.clone(),
                    args,
                    rel: store.relation(&l.atom.pred),
                }
            })
            .collect();
        Solver { lits, names, order: order.map(<[usize]>::to_vec) }
    }

    fn run(&self, f: &mut Visitor) -> Result<ControlFlow<()>> {
        let mut values = vec![None; self.names.len()];
        let mut done = vec![false; self.lits.len()];
        self.search(&mut values, &mut done, f)
    }

    fn value<'a>(slot: &'a Slot, values: &'a [Option<Const>]) -> Option<&'a Const> {
        match slot {
            Slot::Const(c) => Some(c),
            Slot::Var(i) => values[*i].as_ref(),
        }
    }

    fn is_join(&self, i: usize) -> bool {
        let l = &self.lits[i];
        l.positive && l.op.is_none()
    }

    /// Check or apply every filter whose arguments are bound. Returns false
    /// if one fails. Newly done literals and bound variables are recorded
    /// for undoing.
    fn filter(
        &self,
        values: &mut [Option<Const>],
        done: &mut [bool],
        undo_lits: &mut Vec<usize>,
        undo_vars: &mut Vec<usize>,
    ) -> Result<bool> {
        loop {
            let mut changed = false;
            for (i, l) in self.lits.iter().enumerate() {
                if done[i] || self.is_join(i) {
                    continue;
                }
                match l.op {
                    Some(op) => {
                        let a = Self::value(&l.args[0], values).cloned();
                        let b = Self::value(&l.args[1], values).cloned();
                        match (a, b) {
                            (Some(a), Some(b)) => {
                                if eval_cmp(op, &a, &b)? != l.positive {
                                    return Ok(false);
                                }
                            }
                            // equality with one bound side binds the other
                            (Some(c), None) | (None, Some(c)) if op == CmpOp::Eq && l.positive => {
                                let free = l.args.iter().find_map(|s| match s {
                                    Slot::Var(v) if values[*v].is_none() => Some(*v),
                                    _ => None,
                                });
                                let v = free.expect("one side is unbound");
                                values[v] = Some(c);
                                undo_vars.push(v);
                            }
                            _ => continue,
                        }
                    }
                    None => {
                        let row: Option<Vec<Const>> = l.args.iter().map(|s| Self::value(s, values).cloned()).collect();
                        let Some(row) = row else { continue };
                        if l.rel.is_some_and(|r| r.contains(&row)) {
                            return Ok(false);
                        }
                    }
                }
                done[i] = true;
                undo_lits.push(i);
                changed = true;
            }
            if !changed {
                return Ok(true);
            }
        }
    }

    fn search(&self, values: &mut Vec<Option<Const>>, done: &mut Vec<bool>, f: &mut Visitor) -> Result<ControlFlow<()>> {
        let mut undo_lits = Vec::new();
        let mut undo_vars = Vec::new();
        let mut flow = ControlFlow::Continue(());
        if self.filter(values, done, &mut undo_lits, &mut undo_vars)? {
            flow = self.step(values, done, f)?;
        }
        for i in undo_lits {
            done[i] = false;
        }
        for v in undo_vars {
            values[v] = None;
        }
        Ok(flow)
    }

    fn step(&self, values: &mut Vec<Option<Const>>, done: &mut Vec<bool>, f: &mut Visitor) -> Result<ControlFlow<()>> {
        let next = match &self.order {
            Some(order) => order
                .iter()
                .copied()
                .filter(|&i| i < self.lits.len() && self.is_join(i) && !done[i])
                .chain((0..self.lits.len()).filter(|&i| self.is_join(i) && !done[i]))
                .next()
                .map(|i| (i, self.candidates(i, values))),
            None => (0..self.lits.len())
                .filter(|&i| self.is_join(i) && !done[i])
                .map(|i| (i, self.candidates(i, values)))
                .min_by_key(|(_, c)| c.len()),
        };
        let Some((i, cands)) = next else {
            if let Some(j) = (0..self.lits.len()).find(|&j| !done[j]) {
                let l = &self.lits[j];
                return Err(Error::NonGroundBuiltin(format!("{} literal over {} left unbound", if l.positive { "" } else { "negated" }, l.pred)));
            }
            return f(&Bindings { names: &self.names, values });
        };
        let lit = &self.lits[i];
        let Some(rel) = lit.rel else { return Ok(ControlFlow::Continue(())) };
        done[i] = true;
        let mut bound_here = Vec::new();
        for row_id in cands.iter() {
            let row = &rel.rows[row_id as usize];
            let mut ok = true;
            for (slot, val) in lit.args.iter().zip(row) {
                match slot {
                    Slot::Const(c) => ok = c == val,
                    Slot::Var(v) => match &values[*v] {
                        Some(b) => ok = b == val,
                        None => {
                            values[*v] = Some(val.clone());
                            bound_here.push(*v);
                        }
                    },
                }
                if !ok {
                    break;
                }
            }
            let flow = if ok { self.search(values, done, f)? } else { ControlFlow::Continue(()) };
            for v in bound_here.drain(..) {
                values[v] = None;
            }
            if flow.is_break() {
                done[i] = false;
                return Ok(flow);
            }
        }
        done[i] = false;
        Ok(ControlFlow::Continue(()))
    }

    /// Candidate rows for literal `i` under the current bindings.
    fn candidates(&self, i: usize, values: &[Option<Const>]) -> Candidates<'s> {
        let lit = &self.lits[i];
        let Some(rel) = lit.rel else { return Candidates::Ids(Vec::new()) };
        let mut best: Option<&'s [u32]> = None;
        for (pos, slot) in lit.args.iter().enumerate() {
            if let Some(c) = Self::value(slot, values) {
                let hits = rel.lookup(pos, c);
                if best.is_none_or(|b| hits.len() < b.len()) {
                    best = Some(hits);
                }
            }
        }
        if let Some(b) = best {
            return Candidates::Slice(b);
        }
        let mut narrowed: Option<Vec<u32>> = None;
        for (pos, slot) in lit.args.iter().enumerate() {
            let Slot::Var(v) = slot else { continue };
            let (lo, hi) = self.bounds_on(*v, values);
            if matches!((&lo, &hi), (Bound::Unbounded, Bound::Unbounded)) {
                continue;
            }
            if let Some(ids) = rel.range(pos, bound_ref(&lo), bound_ref(&hi)) {
                if narrowed.as_ref().is_none_or(|n| ids.len() < n.len()) {
                    narrowed = Some(ids);
                }
            }
        }
        match narrowed {
            Some(ids) => Candidates::Ids(ids),
            None => Candidates::All(rel.len()),
        }
    }

    /// Tightest bounds on an unbound variable from comparisons whose other
    /// side is known.
    fn bounds_on(&self, v: usize, values: &[Option<Const>]) -> (Bound<Const>, Bound<Const>) {
        let mut lo = Bound::Unbounded;
        let mut hi = Bound::Unbounded;
        for l in &self.lits {
            let Some(op) = l.op else { continue };
            if !l.positive {
                continue;
            }
            let (op, other) = match (&l.args[0], &l.args[1]) {
                (Slot::Var(a), b) if *a == v => (op, Self::value(b, values)),
                (a, Slot::Var(b)) if *b == v => (op.flipped(), Self::value(a, values)),
                _ => continue,
            };
            let Some(c) = other else { continue };
            match op {
                CmpOp::Gt => lo = tighter_lo(lo, Bound::Excluded(c.clone())),
                CmpOp::Ge => lo = tighter_lo(lo, Bound::Included(c.clone())),
                CmpOp::Lt => hi = tighter_hi(hi, Bound::Excluded(c.clone())),
                CmpOp::Le => hi = tighter_hi(hi, Bound::Included(c.clone())),
                CmpOp::Eq => {
                    lo = tighter_lo(lo, Bound::Included(c.clone()));
                    hi = tighter_hi(hi, Bound::Included(c.clone()));
                }
                CmpOp::Ne => {}
            }
        }
        (lo, hi)
    }
}

fn bound_ref(b: &Bound<Const>) -> Bound<&Const> {
    match b {
        Bound::Included(c) => Bound::Included(c),
        Bound::Excluded(c) => Bound::Excluded(c),
        Bound::Unbounded => Bound::Unbounded,
    }
}

fn bound_key(b: &Bound<Const>) -> Option<(&Const, bool)> {
    match b {
        Bound::Included(c) => Some((c, true)),
        Bound::Excluded(c) => Some((c, false)),
        Bound::Unbounded => None,
    }
}

fn tighter_lo(a: Bound<Const>, b: Bound<Const>) -> Bound<Const> {
    match (bound_key(&a), bound_key(&b)) {
        (None, _) => b,
        (_, None) => a,
        (Some((x, xi)), Some((y, yi))) => {
            if y > x || (y == x && !yi && xi) {
                b
            } else {
                a
            }
        }
    }
}

fn tighter_hi(a: Bound<Const>, b: Bound<Const>) -> Bound<Const> {
    match (bound_key(&a), bound_key(&b)) {
        (None, _) => b,
        (_, None) => a,
        (Some((x, xi)), Some((y, yi))) => {
            if y < x || (y == x && !yi && xi) {
                b
            } else {
                a
            }
        }
    }
}

enum Candidates<'s> {
    Slice(&'s [u32]),
    Ids(Vec<u32>),
    All(usize),
}

impl Candidates<'_> {
    fn len(&self) -> usize {
        match self {
            Candidates::Slice(s) => s.len(),
            Candidates::Ids(v) => v.len(),
            Candidates::All(n) => *n,
        }
    }

    fn iter(&self) -> Box<dyn Iterator<Item = u32> + '_> {
        match self {
            Candidates::Slice(s) => Box::new(s.iter().copied()),
            Candidates::Ids(v) => Box::new(v.iter().copied()),
            Candidates::All(n) => Box::new(0..*n as u32),
        }
    }
}

/// Precision and recall of `approx` against `exact`, each 1 on an empty
/// denominator.
pub fn precision_recall(exact: &AnswerSet, approx: &AnswerSet) -> Result<(f64, f64)> {
    if exact.arity != approx.arity {
        return Err(Error::ArityMismatch(format!(
            "{} has arity {} but {} has arity {}",
            exact.name, exact.arity, approx.name, approx.arity
        )));
    }
    let common = exact.tuples.intersection(&approx.tuples).count() as f64;
    let p = if approx.is_empty() { 1.0 } else { common / approx.len() as f64 };
    let r = if exact.is_empty() { 1.0 } else { common / exact.len() as f64 };
    Ok((p, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AnnotatedClause, Atom, Clause};

    fn atom(p: &str, args: Vec<Term>) -> Atom {
        Atom::new(p, args)
    }

    fn ints(db: &mut Database, pred: &str, vals: &[i64]) {
        for v in vals {
            let id = format!("f{}", db.edb.len() + 1);
            db.edb.push(AnnotatedClause::fact(id, atom(pred, vec![Term::int(*v)])));
        }
    }

    #[test]
    fn restriction_filters_answers() {
        let mut db = Database::new();
        ints(&mut db, "p", &[1, 5]);
        let store = ExtensionStore::from_database(&db).unwrap();
        let q = Query::all_vars(
            "q",
            vec![
                Literal::pos(atom("p", vec![Term::var("X")])),
                Literal::pos(Atom::cmp(CmpOp::Lt, Term::var("X"), Term::int(3))),
            ],
        );
        let ans = evaluate(&q, &store).unwrap();
        assert_eq!(ans.tuples.into_iter().collect::<Vec<_>>(), vec![vec![Const::Int(1)]]);
    }

    #[test]
    fn sizes_and_derived_extensions() {
        let mut db = Database::new();
        ints(&mut db, "p", &[1, 2, 3]);
        ints(&mut db, "r", &[3, 4]);
        let x = || vec![Term::var("X")];
        db.idb.push(AnnotatedClause::rule("r1", Clause::new(Some(atom("s", x())), vec![Literal::pos(atom("p", x()))])));
        db.idb.push(AnnotatedClause::rule("r2", Clause::new(Some(atom("s", x())), vec![Literal::pos(atom("r", x()))])));
        db.ic.push(AnnotatedClause::constraint("ic", Clause::new(None, vec![Literal::pos(atom("e", x()))]), BeliefInterval::CERTAIN));
        let store = ExtensionStore::from_database(&db).unwrap();
        let cm = extension_stats(&db, &store);
        assert_eq!(cm.size("p"), 3);
        assert_eq!(cm.size("e"), 0);
        assert_eq!(cm.size("s"), 4);
        assert!(cm.is_indexed("p", 0));
    }

    use crate::model::BeliefInterval;

    #[test]
    fn negation_and_unbound_filters() {
        let mut db = Database::new();
        ints(&mut db, "p", &[1, 2]);
        ints(&mut db, "r", &[2]);
        let store = ExtensionStore::from_database(&db).unwrap();
        let q = Query::all_vars(
            "q",
            vec![Literal::pos(atom("p", vec![Term::var("X")])), Literal::neg(atom("r", vec![Term::var("X")]))],
        );
        assert_eq!(evaluate(&q, &store).unwrap().len(), 1);
        let bad = Query::new("q", vec![], vec![Literal::pos(Atom::cmp(CmpOp::Lt, Term::var("X"), Term::int(3)))]);
        assert!(matches!(evaluate(&bad, &store), Err(Error::NonGroundBuiltin(_))));
        let mixed = Query::all_vars(
            "q",
            vec![Literal::pos(atom("p", vec![Term::var("X")])), Literal::pos(Atom::cmp(CmpOp::Lt, Term::var("X"), Term::sym("a")))],
        );
        assert!(matches!(evaluate(&mixed, &store), Err(Error::TypeMismatch { .. })));
    }

    #[test]
    fn range_scan_respects_bounds() {
        let mut r = Relation::new(1);
        for v in [5, 1, 9, 3] {
            r.insert(vec![Const::Int(v)]).unwrap();
        }
        let ids = r.range(0, Bound::Included(&Const::Int(3)), Bound::Excluded(&Const::Int(9))).unwrap();
        let mut got: Vec<i64> = ids.iter().map(|&i| match r.rows()[i as usize][0] { Const::Int(v) => v, _ => 0 }).collect();
        got.sort();
        assert_eq!(got, [3, 5]);
        r.insert(vec![Const::sym("a")]).unwrap();
        assert!(r.range(0, Bound::Unbounded, Bound::Included(&Const::Int(3))).is_none());
    }

    #[test]
    fn precision_recall_examples() {
        let set = |xs: &[&str]| AnswerSet {
            name: "q".into(),
            arity: 1,
            tuples: xs.iter().map(|x| vec![Const::sym(x)]).collect(),
        };
        assert_eq!(precision_recall(&set(&["a"]), &set(&["a"])).unwrap(), (1.0, 1.0));
        assert_eq!(precision_recall(&set(&["a", "b"]), &set(&["b", "c"])).unwrap(), (0.5, 0.5));
        let (p, r) = precision_recall(&set(&["a", "b"]), &set(&["a"])).unwrap();
        assert_eq!(p, 1.0);
        assert!(r < 1.0);
        let other = AnswerSet { name: "z".into(), arity: 2, tuples: BTreeSet::new() };
        assert!(matches!(precision_recall(&set(&[]), &other), Err(Error::ArityMismatch(_))));
    }
}
