//! Structural validation of databases and queries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::model::{AnnotatedClause, Atom, BeliefInterval, ClauseKind, Database, Query, MIN_USABLE_CERTAINTY};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    NotRangeRestricted,
    Cycle,
    NonGroundFact,
    BadInterval,
    WeakConstraint,
    ArityConflict,
    MixedPredicate,
    BuiltinHead,
    NegatedIntensional,
    UncertainRule,
    NonHierarchicalWithConstraints,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub clause: Option<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.clause {
            Some(id) => write!(f, "{id}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.errors.iter().chain(&self.warnings).any(|v| v.kind == kind)
    }

    fn error(&mut self, kind: ViolationKind, clause: Option<&str>, message: String) {
        self.errors.push(Violation { kind, clause: clause.map(str::to_string), message });
    }

    fn warn(&mut self, kind: ViolationKind, clause: Option<&str>, message: String) {
        self.warnings.push(Violation { kind, clause: clause.map(str::to_string), message });
    }
}

/// Check a database for every structural violation.
pub fn validate_database(db: &Database) -> ValidationReport {
    let mut report = ValidationReport::default();
    let idb_preds = db.intensional_preds();
    check_arities(db, &mut report);

    for fact in &db.edb {
        check_interval(fact, &mut report);
        let id = Some(fact.id.as_str());
        match fact.head() {
            None => report.error(ViolationKind::NonGroundFact, id, "fact without head".into()),
            Some(h) if h.is_builtin() => report.error(ViolationKind::BuiltinHead, id, format!("fact {h} uses a built-in predicate")),
            Some(h) => {
                if !fact.clause.is_ground() || !fact.clause.body.is_empty() {
                    report.error(ViolationKind::NonGroundFact, id, format!("fact {} is not ground", fact.clause));
                }
                if idb_preds.contains(&h.pred) {
                    report.error(ViolationKind::MixedPredicate, id, format!("predicate {} has both facts and rules", h.pred));
                }
            }
        }
    }

    for rule in &db.idb {
        check_interval(rule, &mut report);
        let id = Some(rule.id.as_str());
        match rule.head() {
            None => report.error(ViolationKind::BuiltinHead, id, "rule without head".into()),
            Some(h) if h.is_builtin() => report.error(ViolationKind::BuiltinHead, id, format!("rule head {h} is a built-in")),
            Some(_) => {}
        }
        if rule.belief != BeliefInterval::CERTAIN {
            report.error(ViolationKind::UncertainRule, id, format!("rule interval {} is not [1, 1]", rule.belief));
        }
        check_clause_body(rule, &idb_preds, &mut report);
    }

    for ic in &db.ic {
        check_interval(ic, &mut report);
        if ic.belief.v < MIN_USABLE_CERTAINTY {
            report.warn(
                ViolationKind::WeakConstraint,
                Some(&ic.id),
                format!("certainty {} is below {MIN_USABLE_CERTAINTY}; the constraint is never used for rewriting", ic.belief.v),
            );
        }
        check_clause_body(ic, &idb_preds, &mut report);
    }

    let rules_only = dependency_edges(db.idb.iter());
    if let Some(cycle) = find_cycle(&rules_only) {
        report.error(ViolationKind::Cycle, None, format!("predicate dependence cycle {cycle}"));
    } else {
        let with_ic = dependency_edges(db.idb.iter().chain(db.ic.iter()));
        if let Some(cycle) = find_cycle(&with_ic) {
            report.warn(
                ViolationKind::NonHierarchicalWithConstraints,
                None,
                format!("constraints close the dependence cycle {cycle}; belief checks over the full program are unavailable"),
            );
        }
    }
    report
}

/// Check that a query is range restricted and fits the database schema.
pub fn validate_query(db: &Database, q: &Query) -> ValidationReport {
    let mut report = ValidationReport::default();
    let vars = q.vars();
    for v in &q.output_vars {
        if !vars.contains(v) {
            report.error(ViolationKind::NotRangeRestricted, Some(&q.name), format!("output variable {v} does not occur in the body"));
        }
    }
    if q.body.is_empty() {
        report.error(ViolationKind::NotRangeRestricted, Some(&q.name), "query body is empty".into());
    }
    let clause = q.as_clause();
    let unrestricted = clause.unrestricted_vars();
    if !unrestricted.is_empty() {
        report.error(ViolationKind::NotRangeRestricted, Some(&q.name), format!("variables {} are not range restricted", join(&unrestricted)));
    }
    let arities = db.predicate_arities();
    let idb = db.intensional_preds();
    for lit in &q.body {
        if lit.is_builtin() {
            continue;
        }
        if let Some(&n) = arities.get(&lit.atom.pred) {
            if n != lit.atom.arity() {
                report.error(ViolationKind::ArityConflict, Some(&q.name), format!("{} used with arity {}, expected {n}", lit.atom.pred, lit.atom.arity()));
            }
        }
        if !lit.positive && idb.contains(&lit.atom.pred) {
            report.error(ViolationKind::NegatedIntensional, Some(&q.name), format!("negated intensional literal {lit}"));
        }
    }
    report
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn check_interval(c: &AnnotatedClause, report: &mut ValidationReport) {
    if !c.belief.is_valid() {
        report.error(ViolationKind::BadInterval, Some(&c.id), format!("ill-formed interval {}", c.belief));
    }
}

fn check_clause_body(c: &AnnotatedClause, idb: &BTreeSet<Arc<str>>, report: &mut ValidationReport) {
    let unrestricted = c.clause.unrestricted_vars();
    if !unrestricted.is_empty() {
        report.error(
            ViolationKind::NotRangeRestricted,
            Some(&c.id),
            format!("variables {} of {} are not range restricted", join(&unrestricted), c.clause),
        );
    }
    for lit in &c.clause.body {
        if !lit.positive && idb.contains(&lit.atom.pred) {
            report.error(ViolationKind::NegatedIntensional, Some(&c.id), format!("negated intensional literal {lit}"));
        }
    }
    if c.kind == ClauseKind::Constraint && c.clause.body.is_empty() {
        report.error(ViolationKind::NotRangeRestricted, Some(&c.id), "constraint with empty body".into());
    }
}

fn check_arities(db: &Database, report: &mut ValidationReport) {
    let mut seen: BTreeMap<Arc<str>, (usize, String)> = BTreeMap::new();
    let mut note = |a: &Atom, id: &str, report: &mut ValidationReport| {
        if a.is_builtin() {
            return;
        }
        match seen.get(&a.pred) {
            Some((n, first)) if *n != a.arity() => report.error(
                ViolationKind::ArityConflict,
                Some(id),
                format!("{} used with arity {} but {first} uses arity {n}", a.pred, a.arity()),
            ),
            Some(_) => {}
            None => {
                seen.insert(a.pred.clone(), (a.arity(), id.to_string()));
            }
        }
    };
    for c in db.edb.iter().chain(&db.idb).chain(&db.ic) {
        if let Some(h) = c.head() {
            note(h, &c.id, report);
        }
        for l in &c.clause.body {
            note(&l.atom, &c.id, report);
        }
    }
}

type Edges = BTreeMap<Arc<str>, BTreeSet<Arc<str>>>;

fn dependency_edges<'a>(clauses: impl Iterator<Item = &'a AnnotatedClause>) -> Edges {
    let mut edges: Edges = BTreeMap::new();
    for c in clauses {
        let Some(h) = c.head() else { continue };
        if h.is_builtin() {
            continue;
        }
        let entry = edges.entry(h.pred.clone()).or_default();
        for l in &c.clause.body {
            if !l.is_builtin() {
                entry.insert(l.atom.pred.clone());
            }
        }
    }
    edges
}

/// Return a cycle in the predicate dependence graph, rendered as `p -> q -> p`.
fn find_cycle(edges: &Edges) -> Option<String> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    fn visit(node: &Arc<str>, edges: &Edges, marks: &mut BTreeMap<Arc<str>, Mark>, stack: &mut Vec<Arc<str>>) -> Option<String> {
        match marks.get(node) {
            Some(Mark::Done) => return None,
            Some(Mark::Open) => {
                let start = stack.iter().position(|p| p == node).unwrap_or(0);
                let mut path: Vec<String> = stack[start..].iter().map(|p| p.to_string()).collect();
                path.push(node.to_string());
                return Some(path.join(" -> "));
            }
            None => {}
        }
        marks.insert(node.clone(), Mark::Open);
        stack.push(node.clone());
        if let Some(next) = edges.get(node) {
            for n in next {
                if let Some(c) = visit(n, edges, marks, stack) {
                    return Some(c);
                }
            }
        }
        stack.pop();
        marks.insert(node.clone(), Mark::Done);
        None
    }
    let mut marks = BTreeMap::new();
    for node in edges.keys() {
        let mut stack = Vec::new();
        if let Some(c) = visit(node, edges, &mut marks, &mut stack) {
            return Some(c);
        }
    }
    None
}

/// Predicates in an order where every predicate follows those it depends on
/// through rules. Requires an acyclic rule set.
pub fn rule_strata(db: &Database) -> Vec<Arc<str>> {
    let edges = dependency_edges(db.idb.iter());
    let mut order = Vec::new();
    let mut done = BTreeSet::new();
    fn visit(p: &Arc<str>, edges: &Edges, done: &mut BTreeSet<Arc<str>>, order: &mut Vec<Arc<str>>) {
        if !done.insert(p.clone()) {
            return;
        }
        if let Some(deps) = edges.get(p) {
            for d in deps {
                visit(d, edges, done, order);
            }
        }
        if edges.contains_key(p) {
            order.push(p.clone());
        }
    }
    for p in edges.keys() {
        visit(p, &edges, &mut done, &mut order);
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Atom, Clause, Literal, Term};

    fn a(p: &str, vars: &[&str]) -> Atom {
        Atom::new(p, vars.iter().map(|v| Term::var(v)).collect())
    }

    #[test]
    fn self_dependence_is_a_cycle() {
        let mut db = Database::new();
        db.idb.push(AnnotatedClause::rule("r1", Clause::new(Some(a("p", &["X"])), vec![Literal::pos(a("p", &["X"]))])));
        let r = validate_database(&db);
        assert!(r.errors.iter().any(|v| v.kind == ViolationKind::Cycle));
    }

    #[test]
    fn unbound_head_variable_is_reported() {
        let mut db = Database::new();
        db.idb.push(AnnotatedClause::rule("r1", Clause::new(Some(a("q", &["X", "Y"])), vec![Literal::pos(a("r", &["X"]))])));
        let r = validate_database(&db);
        assert_eq!(r.errors.len(), 1);
        assert_eq!(r.errors[0].kind, ViolationKind::NotRangeRestricted);
    }

    #[test]
    fn weak_constraint_is_only_a_warning() {
        let mut db = Database::new();
        db.ic.push(AnnotatedClause::constraint(
            "ic",
            Clause::new(Some(a("q", &["X"])), vec![Literal::pos(a("r", &["X"]))]),
            BeliefInterval::point(0.3),
        ));
        let r = validate_database(&db);
        assert!(r.is_ok());
        assert!(r.has(ViolationKind::WeakConstraint));
    }

    #[test]
    fn strata_follow_dependencies() {
        let mut db = Database::new();
        db.idb.push(AnnotatedClause::rule("r1", Clause::new(Some(a("top", &["X"])), vec![Literal::pos(a("mid", &["X"]))])));
        db.idb.push(AnnotatedClause::rule("r2", Clause::new(Some(a("mid", &["X"])), vec![Literal::pos(a("base", &["X"]))])));
        let order: Vec<String> = rule_strata(&db).iter().map(|p| p.to_string()).collect();
        assert_eq!(order, vec!["mid", "top"]);
    }
}
