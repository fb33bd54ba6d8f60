//! Mining uncertain constraints as association rules over a database.
//!
//! Bodies are connected conjunctions of positive atoms whose arguments are
//! all variables. Heads are single atoms over body variables or bounds
//! `V >= c` / `V <= c` on an integer-valued body variable, with `c` taken
//! from the values the variable takes. The confidence of a rule is the
//! fraction of body solutions that satisfy the head.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use crate::builtin::eval_builtin;
use crate::error::{Error, Result};
use crate::eval::{solutions, ExtensionStore};
use crate::model::{
    AnnotatedClause, Atom, BeliefInterval, Clause, CmpOp, Const, Database, Literal, Term, Var, MIN_USABLE_CERTAINTY,
};
use crate::unify::{Apply, Substitution};

/// Largest Herbrand base the model-fraction oracle enumerates.
pub const MODEL_FRACTION_CAP: usize = 20;

/// An exact ratio of two counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ratio {
    pub num: usize,
    pub den: usize,
}

impl Ratio {
    /// The ratio as a number; 1 when nothing is counted.
    pub fn value(self) -> f64 {
        if self.den == 0 {
            1.0
        } else {
            self.num as f64 / self.den as f64
        }
    }

    fn at_least(self, min: f64) -> bool {
        self.den > 0 && self.value() >= min
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinedRule {
    pub clause: Clause,
    /// Body solutions that also satisfy the head.
    pub support: usize,
    /// Body solutions.
    pub body_count: usize,
    pub confidence: f64,
}

impl MinedRule {
    pub fn to_constraint(&self, id: impl Into<String>) -> AnnotatedClause {
        AnnotatedClause::constraint(id, self.clause.clone(), BeliefInterval::point(self.confidence))
    }
}

impl fmt::Display for MinedRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}  % {}/{}", self.clause, self.support, self.body_count)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinerConfig {
    pub min_conf: f64,
    pub max_body: usize,
    /// Predicates allowed in bodies and heads; all extensional predicates
    /// when `None`.
    pub predicates: Option<Vec<String>>,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig { min_conf: 0.8, max_body: 2, predicates: None }
    }
}

/// Count the body solutions of `c` and those satisfying its head. Head
/// variables must occur in the body.
pub fn certainty_ratio(c: &Clause, store: &ExtensionStore) -> Result<Ratio> {
    let vars = body_only_vars(c);
    let rows = solutions(&c.body, store, &vars)?;
    let mut num = 0;
    for row in &rows {
        let s: Substitution = vars.iter().cloned().zip(row.iter().cloned().map(Term::Const)).collect();
        if let Some(h) = &c.head {
            if head_holds(&h.apply(&s), store)? {
                num += 1;
            }
        }
    }
    Ok(Ratio { num, den: rows.len() })
}

/// Fraction of body solutions that satisfy the head; 1 when the body has no
/// solution.
pub fn degree_of_certainty(c: &Clause, store: &ExtensionStore) -> Result<f64> {
    certainty_ratio(c, store).map(Ratio::value)
}

fn body_only_vars(c: &Clause) -> Vec<Var> {
    let mut out = Vec::new();
    for l in &c.body {
        l.atom.collect_vars(&mut out);
    }
    out
}

fn head_holds(h: &Atom, store: &ExtensionStore) -> Result<bool> {
    if h.is_builtin() {
        return eval_builtin(h);
    }
    match h.ground_args() {
        Some(args) => Ok(store.contains(&h.pred, &args)),
        None => Err(Error::NonGroundBuiltin(h.to_string())),
    }
}

fn var(i: usize) -> Term {
    Term::Var(Var::new(&format!("V{}", i + 1)))
}

/// Rename variables by first occurrence after ordering the atoms, trying
/// every order of atoms that share a predicate, and keep the least result.
pub fn canonical_body(atoms: &[Atom]) -> Vec<Atom> {
    let mut sorted = atoms.to_vec();
    sorted.sort_by(|a, b| a.pred.cmp(&b.pred));
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=sorted.len() {
        if i == sorted.len() || sorted[i].pred != sorted[start].pred {
            groups.push((start, i));
            start = i;
        }
    }
    let mut best: Option<Vec<Atom>> = None;
    permute_groups(&mut sorted, &groups, 0, &mut |order| {
        let cand = rename_by_occurrence(order);
        if best.as_ref().is_none_or(|b| cand < *b) {
            best = Some(cand);
        }
    });
    best.unwrap_or_default()
}

fn permute_groups(atoms: &mut [Atom], groups: &[(usize, usize)], g: usize, f: &mut impl FnMut(&[Atom])) {
    let Some(&(lo, hi)) = groups.get(g) else {
        f(atoms);
        return;
    };
    heap_permute(atoms, lo, hi - lo, &mut |atoms| permute_groups(atoms, groups, g + 1, f));
}

fn heap_permute(atoms: &mut [Atom], lo: usize, k: usize, f: &mut impl FnMut(&mut [Atom])) {
    if k <= 1 {
        f(atoms);
        return;
    }
    for i in 0..k - 1 {
        heap_permute(atoms, lo, k - 1, f);
        let j = if k.is_multiple_of(2) { lo + i } else { lo };
        atoms.swap(j, lo + k - 1);
    }
    heap_permute(atoms, lo, k - 1, f);
}

fn rename_by_occurrence(atoms: &[Atom]) -> Vec<Atom> {
    let mut names: Vec<Var> = Vec::new();
    for a in atoms {
        a.collect_vars(&mut names);
    }
    let s = Substitution::simultaneous(names.iter().enumerate().map(|(i, v)| (v.clone(), var(i))));
    atoms.iter().map(|a| a.apply(&s)).collect()
}

/// Are the atoms linked through shared variables?
pub fn is_connected(atoms: &[Atom]) -> bool {
    if atoms.is_empty() {
        return false;
    }
    let vars: Vec<Vec<Var>> = atoms.iter().map(Atom::vars).collect();
    let mut seen = vec![false; atoms.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..atoms.len() {
            if !seen[j] && vars[i].iter().any(|v| vars[j].contains(v)) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Every argument pattern of `arity` positions over `existing` variables
/// and new ones, with new variables numbered in order of first use.
fn patterns(arity: usize, existing: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(arity);
    fn go(arity: usize, next: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == arity {
            out.push(cur.clone());
            return;
        }
        for v in 0..=next {
            cur.push(v);
            go(arity, if v == next { next + 1 } else { next }, cur, out);
            cur.pop();
        }
    }
    go(arity, existing, &mut cur, &mut out);
    out
}

fn tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out.into_iter().flat_map(|t| (0..n).map(move |i| [t.clone(), vec![i]].concat())).collect();
    }
    out
}

fn mined_predicates(db: &Database, cfg: &MinerConfig) -> BTreeMap<String, usize> {
    let arities = db.predicate_arities();
    let idb = db.intensional_preds();
    arities
        .into_iter()
        .filter(|(p, _)| match &cfg.predicates {
            Some(list) => list.iter().any(|x| x.as_str() == &**p),
            None => !idb.contains(p),
        })
        .map(|(p, n)| (p.to_string(), n))
        .collect()
}

/// Mine every rule with a body of at most `max_body` atoms whose
/// confidence reaches `min_conf`. Bodies without solutions yield nothing.
/// The result is sorted by clause text.
pub fn mine(db: &Database, store: &ExtensionStore, cfg: &MinerConfig) -> Result<Vec<MinedRule>> {
    if !(MIN_USABLE_CERTAINTY..=1.0).contains(&cfg.min_conf) {
        return Err(Error::Config(format!("min-conf must lie in [{MIN_USABLE_CERTAINTY}, 1], got {}", cfg.min_conf)));
    }
    let preds = mined_predicates(db, cfg);
    let mut rules = Vec::new();
    let mut level: Vec<Vec<Atom>> = Vec::new();
    let mut seen: HashSet<Vec<Atom>> = HashSet::new();
    for (p, &n) in &preds {
        for pat in patterns(n, 0) {
            let body = canonical_body(&[Atom::new(p, pat.into_iter().map(var).collect())]);
            if seen.insert(body.clone()) {
                level.push(body);
            }
        }
    }
    for size in 1..=cfg.max_body {
        let mut live = Vec::new();
        for body in level {
            if rules_for_body(&body, &preds, store, cfg.min_conf, &mut rules)? {
                live.push(body);
            }
        }
        if size == cfg.max_body {
            break;
        }
        let mut next = Vec::new();
        for body in &live {
            let nvars = body.iter().flat_map(Atom::vars).collect::<BTreeSet<_>>().len();
            for (p, &n) in &preds {
                for pat in patterns(n, nvars) {
                    if pat.iter().all(|&i| i >= nvars) && !body.is_empty() {
                        continue;
                    }
                    let atom = Atom::new(p, pat.into_iter().map(var).collect());
                    if body.contains(&atom) {
                        continue;
                    }
                    let mut grown = body.clone();
                    grown.push(atom);
                    let grown = canonical_body(&grown);
                    if seen.insert(grown.clone()) {
                        next.push(grown);
                    }
                }
            }
        }
        level = next;
    }
    rules.sort_by_cached_key(|r| r.clause.to_string());
    Ok(rules)
}

/// Emit the rules of one body. Returns false when the body has no solution.
fn rules_for_body(
    body: &[Atom],
    preds: &BTreeMap<String, usize>,
    store: &ExtensionStore,
    min_conf: f64,
    out: &mut Vec<MinedRule>,
) -> Result<bool> {
    let lits: Vec<Literal> = body.iter().cloned().map(Literal::pos).collect();
    let vars = body_only_vars(&Clause::new(None, lits.clone()));
    let rows = solutions(&lits, store, &vars)?;
    if rows.is_empty() {
        return Ok(false);
    }
    let den = rows.len();
    let mut emit = |head: Atom, num: usize| {
        let ratio = Ratio { num, den };
        if ratio.at_least(min_conf) {
            out.push(MinedRule {
                clause: Clause::new(Some(head), lits.clone()),
                support: num,
                body_count: den,
                confidence: ratio.value(),
            });
        }
    };
    for (p, &n) in preds {
        for t in tuples(vars.len(), n) {
            let head = Atom::new(p, t.iter().map(|&i| Term::Var(vars[i].clone())).collect());
            if body.contains(&head) {
                continue;
            }
            let num = rows
                .iter()
                .filter(|row| store.contains(p, &t.iter().map(|&i| row[i].clone()).collect::<Vec<_>>()))
                .count();
            emit(head, num);
        }
    }
    for (i, v) in vars.iter().enumerate() {
        let mut values: Vec<i64> = Vec::with_capacity(den);
        for row in &rows {
            match row[i] {
                Const::Int(x) => values.push(x),
                _ => break,
            }
        }
        if values.len() != den {
            continue;
        }
        values.sort_unstable();
        let distinct: BTreeSet<i64> = values.iter().copied().collect();
        for c in distinct {
            let below = values.partition_point(|&x| x < c);
            let upto = values.partition_point(|&x| x <= c);
            emit(Atom::cmp(CmpOp::Ge, Term::Var(v.clone()), Term::int(c)), den - below);
            emit(Atom::cmp(CmpOp::Le, Term::Var(v.clone()), Term::int(c)), upto);
        }
    }
    Ok(true)
}

/// Render mined rules as constraint declarations `ic "M1" [c, c] ...`.
pub fn to_text(rules: &[MinedRule]) -> String {
    rules
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let head = r.clause.head.as_ref().map(|h| format!("{h} ")).unwrap_or_default();
            let body: Vec<String> = r.clause.body.iter().map(ToString::to_string).collect();
            format!(
                "ic \"M{}\" [{}, {}] {head}:- {}.  % {}/{}\n",
                i + 1,
                r.confidence,
                r.confidence,
                body.join(", "),
                r.support,
                r.body_count
            )
        })
        .collect()
}

/// Fraction of the Herbrand models of the facts and rules of `db` that
/// also satisfy `c`. Enumerates every interpretation, so the Herbrand base
/// may hold at most [`MODEL_FRACTION_CAP`] atoms.
pub fn model_fraction_certainty(c: &Clause, db: &Database) -> Result<f64> {
    let mut arities: BTreeMap<String, usize> = db.predicate_arities().into_iter().map(|(p, n)| (p.to_string(), n)).collect();
    let mut consts: BTreeSet<Const> = BTreeSet::new();
    let mut note = |cl: &Clause, arities: &mut BTreeMap<String, usize>| {
        for a in cl.head.iter().chain(cl.body.iter().map(|l| &l.atom)) {
            if !a.is_builtin() {
                arities.entry(a.pred.to_string()).or_insert(a.arity());
            }
            consts.extend(a.args.iter().filter_map(|t| t.as_const().cloned()));
        }
    };
    for x in db.edb.iter().chain(&db.idb).chain(&db.ic) {
        note(&x.clause, &mut arities);
    }
    note(c, &mut arities);
    let consts: Vec<Const> = consts.into_iter().collect();

    let mut base: Vec<Atom> = Vec::new();
    for (p, &n) in &arities {
        let count = consts.len().checked_pow(n as u32).unwrap_or(usize::MAX);
        if base.len().saturating_add(count) > MODEL_FRACTION_CAP {
            return Err(Error::CapExceeded { what: "Herbrand base", size: base.len().saturating_add(count), cap: MODEL_FRACTION_CAP });
        }
        for t in tuples(consts.len(), n) {
            base.push(Atom::new(p, t.into_iter().map(|i| Term::Const(consts[i].clone())).collect()));
        }
    }
    let index: BTreeMap<&Atom, usize> = base.iter().enumerate().map(|(i, a)| (a, i)).collect();

    let ground = |cl: &Clause| -> Result<Vec<(Option<Atom>, Vec<Literal>)>> {
        let vars = cl.vars();
        let mut out = Vec::new();
        for t in tuples(consts.len(), vars.len()) {
            let s: Substitution = vars.iter().cloned().zip(t.into_iter().map(|i| Term::Const(consts[i].clone()))).collect();
            out.push((cl.head.apply(&s), cl.body.apply(&s)));
        }
        Ok(out)
    };
    let theory: Vec<(Option<Atom>, Vec<Literal>)> = {
        let mut v = Vec::new();
        for x in db.edb.iter().chain(&db.idb) {
            v.extend(ground(&x.clause)?);
        }
        v
    };
    let target = ground(c)?;

    let holds = |a: &Atom, bits: u32| -> Result<bool> {
        if a.is_builtin() {
            eval_builtin(a)
        } else {
            Ok(index.get(a).is_some_and(|&i| bits >> i & 1 == 1))
        }
    };
    let satisfied = |clauses: &[(Option<Atom>, Vec<Literal>)], bits: u32| -> Result<bool> {
        for (head, body) in clauses {
            let mut fires = true;
            for l in body {
                if holds(&l.atom, bits)? != l.positive {
                    fires = false;
                    break;
                }
            }
            if fires && !head.as_ref().map_or(Ok(false), |h| holds(h, bits))? {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let (mut models, mut good) = (0u64, 0u64);
    for bits in 0..(1u32 << base.len()) {
        if satisfied(&theory, bits)? {
            models += 1;
            if satisfied(&target, bits)? {
                good += 1;
            }
        }
    }
    Ok(good as f64 / models as f64)
}
