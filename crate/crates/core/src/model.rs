//! First-order language core: terms, atoms, literals, clauses, belief
//! intervals and the three-part database container.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::error::Error;

/// A constant of the language.
///
/// `Fresh` constants are only produced internally when a clause body is
/// grounded for subsumption; the parser can never produce one, so they cannot
/// collide with user data.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Const {
    Int(i64),
    Sym(Arc<str>),
    Fresh(u32),
}

impl Const {
    pub fn sym(s: &str) -> Const {
        Const::Sym(Arc::from(s))
    }

    pub fn is_fresh(&self) -> bool {
        matches!(self, Const::Fresh(_))
    }
}

impl From<i64> for Const {
    fn from(v: i64) -> Self {
        Const::Int(v)
    }
}

impl From<&str> for Const {
    fn from(s: &str) -> Self {
        Const::sym(s)
    }
}

/// True when `s` can be written without quotes in the text format.
pub(crate) fn is_bare_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    let shaped = match chars.next() {
        Some(c) if c.is_ascii_lowercase() => chars.all(|c| c.is_ascii_alphanumeric() || c == '_'),
        _ => false,
    };
    shaped && !matches!(s, "not" | "ic" | "rule")
}

impl fmt::Display for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const::Int(v) => write!(f, "{v}"),
            Const::Sym(s) if is_bare_symbol(s) => write!(f, "{s}"),
            Const::Sym(s) => {
                write!(f, "\"")?;
                for c in s.chars() {
                    match c {
                        '"' => write!(f, "\\\"")?,
                        '\\' => write!(f, "\\\\")?,
                        c => write!(f, "{c}")?,
                    }
                }
                write!(f, "\"")
            }
            Const::Fresh(n) => write!(f, "?k{n}"),
        }
    }
}

/// A variable name.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub Arc<str>);

impl Var {
    pub fn new(name: &str) -> Var {
        Var(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Generator of variables that cannot clash with user variables.
///
/// User variables must start with an uppercase letter, generated ones start
/// with an underscore.
#[derive(Clone, Debug, Default)]
pub struct VarGen {
    next: u64,
}

impl VarGen {
    pub fn new() -> Self {
        Self::default()
    }

    /// A generator whose variables differ from every variable in `used`.
    pub fn avoiding<'a>(used: impl IntoIterator<Item = &'a Var>) -> Self {
        let next = used.into_iter().filter_map(|v| v.name().strip_prefix("_G")?.parse::<u64>().ok()).max().unwrap_or(0);
        VarGen { next }
    }

    pub fn fresh(&mut self) -> Var {
        self.next += 1;
        Var::new(&format!("_G{}", self.next))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Var),
    Const(Const),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(Var::new(name))
    }

    pub fn sym(s: &str) -> Term {
        Term::Const(Const::sym(s))
    }

    pub fn int(v: i64) -> Term {
        Term::Const(Const::Int(v))
    }

    pub fn as_var(&self) -> Option<&Var> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    pub fn as_const(&self) -> Option<&Const> {
        match self {
            Term::Const(c) => Some(c),
            Term::Var(_) => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        matches!(self, Term::Const(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

/// The built-in comparison predicates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Gt, CmpOp::Le, CmpOp::Ge];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<CmpOp> {
        CmpOp::ALL.into_iter().find(|op| op.symbol() == s)
    }

    /// The operator obtained by swapping the two operands.
    pub fn flipped(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Ge => CmpOp::Le,
            op => op,
        }
    }

    /// The operator equivalent to the negation of this one over a total order.
    pub fn negated(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Le => CmpOp::Gt,
        }
    }
}

/// An atom. Built-in comparisons are atoms whose predicate is one of the
/// operator symbols, with exactly two arguments.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub pred: Arc<str>,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: &str, args: Vec<Term>) -> Atom {
        Atom { pred: Arc::from(pred), args }
    }

    pub fn cmp(op: CmpOp, left: Term, right: Term) -> Atom {
        Atom::new(op.symbol(), vec![left, right])
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn cmp_op(&self) -> Option<CmpOp> {
        if self.args.len() == 2 {
            CmpOp::from_symbol(&self.pred)
        } else {
            None
        }
    }

    pub fn is_builtin(&self) -> bool {
        self.cmp_op().is_some()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut Vec<Var>) {
        for t in &self.args {
            if let Term::Var(v) = t {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        }
    }

    /// Ground arguments as constants, or `None` if some argument is a variable.
    pub fn ground_args(&self) -> Option<Vec<Const>> {
        self.args.iter().map(|t| t.as_const().cloned()).collect()
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(op) = self.cmp_op() {
            return write!(f, "{} {} {}", self.args[0], op.symbol(), self.args[1]);
        }
        write!(f, "{}", self.pred)?;
        if !self.args.is_empty() {
            write!(f, "(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{a}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub positive: bool,
    pub atom: Atom,
}

impl Literal {
    pub fn pos(atom: Atom) -> Literal {
        Literal { positive: true, atom }
    }

    pub fn neg(atom: Atom) -> Literal {
        Literal { positive: false, atom }
    }

    pub fn is_builtin(&self) -> bool {
        self.atom.is_builtin()
    }

    pub fn signed_pred(&self) -> SignedPred {
        SignedPred { pred: self.atom.pred.clone(), positive: self.positive }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "not {}", self.atom)
        }
    }
}

/// A predicate together with a sign, used to file residues.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignedPred {
    pub pred: Arc<str>,
    pub positive: bool,
}

impl fmt::Display for SignedPred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.pred)
        } else {
            write!(f, "not {}", self.pred)
        }
    }
}

/// A clause `head :- body`. A missing head denotes a denial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Clause {
    pub head: Option<Atom>,
    pub body: Vec<Literal>,
}

impl Clause {
    pub fn new(head: Option<Atom>, body: Vec<Literal>) -> Clause {
        Clause { head, body }
    }

    pub fn fact(head: Atom) -> Clause {
        Clause { head: Some(head), body: Vec::new() }
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        if let Some(h) = &self.head {
            h.collect_vars(&mut out);
        }
        collect_body_vars(&self.body, &mut out);
        out
    }

    pub fn is_ground(&self) -> bool {
        self.head.as_ref().is_none_or(Atom::is_ground) && self.body.iter().all(|l| l.atom.is_ground())
    }

    /// Variables not occurring in a positive non-built-in body literal.
    pub fn unrestricted_vars(&self) -> Vec<Var> {
        let mut bound = Vec::new();
        for lit in &self.body {
            if lit.positive && !lit.is_builtin() {
                lit.atom.collect_vars(&mut bound);
            }
        }
        self.vars().into_iter().filter(|v| !bound.contains(v)).collect()
    }
}

pub fn collect_body_vars(body: &[Literal], out: &mut Vec<Var>) {
    for lit in body {
        lit.atom.collect_vars(out);
    }
}

pub fn body_vars(body: &[Literal]) -> Vec<Var> {
    let mut out = Vec::new();
    collect_body_vars(body, &mut out);
    out
}

pub(crate) fn write_body(f: &mut fmt::Formatter<'_>, body: &[Literal]) -> fmt::Result {
    for (i, l) in body.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{l}")?;
    }
    Ok(())
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.head, self.body.is_empty()) {
            (Some(h), true) => write!(f, "{h}"),
            (Some(h), false) => {
                write!(f, "{h} :- ")?;
                write_body(f, &self.body)
            }
            (None, _) => {
                write!(f, ":- ")?;
                write_body(f, &self.body)
            }
        }
    }
}

/// A belief interval `[v, w]` with `0 <= v <= w <= 1`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct BeliefInterval {
    pub v: f64,
    pub w: f64,
}

impl BeliefInterval {
    pub const CERTAIN: BeliefInterval = BeliefInterval { v: 1.0, w: 1.0 };
    pub const FALSE: BeliefInterval = BeliefInterval { v: 0.0, w: 0.0 };
    pub const IGNORANT: BeliefInterval = BeliefInterval { v: 0.0, w: 1.0 };

    pub fn new(v: f64, w: f64) -> Result<BeliefInterval, Error> {
        if v.is_finite() && w.is_finite() && (0.0..=1.0).contains(&v) && (0.0..=1.0).contains(&w) && v <= w {
            Ok(BeliefInterval { v, w })
        } else {
            Err(Error::BadInterval { v, w })
        }
    }

    /// The point interval `[v, v]`.
    pub fn point(v: f64) -> BeliefInterval {
        BeliefInterval::new(v, v).expect("point interval outside [0,1]")
    }

    pub fn is_valid(&self) -> bool {
        BeliefInterval::new(self.v, self.w).is_ok()
    }
}

impl fmt::Display for BeliefInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.v, self.w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClauseKind {
    Fact,
    Rule,
    Constraint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatedClause {
    pub id: String,
    pub clause: Clause,
    pub belief: BeliefInterval,
    pub kind: ClauseKind,
}

impl AnnotatedClause {
    pub fn fact(id: impl Into<String>, atom: Atom) -> Self {
        AnnotatedClause { id: id.into(), clause: Clause::fact(atom), belief: BeliefInterval::CERTAIN, kind: ClauseKind::Fact }
    }

    pub fn rule(id: impl Into<String>, clause: Clause) -> Self {
        AnnotatedClause { id: id.into(), clause, belief: BeliefInterval::CERTAIN, kind: ClauseKind::Rule }
    }

    pub fn constraint(id: impl Into<String>, clause: Clause, belief: BeliefInterval) -> Self {
        AnnotatedClause { id: id.into(), clause, belief, kind: ClauseKind::Constraint }
    }

    pub fn head(&self) -> Option<&Atom> {
        self.clause.head.as_ref()
    }
}

/// Constraints whose certainty is below this value are loadable but never
/// used for rewriting.
pub const MIN_USABLE_CERTAINTY: f64 = 0.5;

/// A deductive database: facts, rules and integrity constraints.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Database {
    pub edb: Vec<AnnotatedClause>,
    pub idb: Vec<AnnotatedClause>,
    pub ic: Vec<AnnotatedClause>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    /// Predicates defined by at least one rule.
    pub fn intensional_preds(&self) -> BTreeSet<Arc<str>> {
        self.idb.iter().filter_map(|r| r.head().map(|h| h.pred.clone())).collect()
    }

    pub fn is_intensional(&self, pred: &str) -> bool {
        self.idb.iter().any(|r| r.head().is_some_and(|h| &*h.pred == pred))
    }

    /// Every non-built-in predicate mentioned anywhere, with its arity.
    pub fn predicate_arities(&self) -> BTreeMap<Arc<str>, usize> {
        let mut out = BTreeMap::new();
        let mut note = |a: &Atom| {
            if !a.is_builtin() {
                out.entry(a.pred.clone()).or_insert(a.arity());
            }
        };
        for c in self.edb.iter().chain(&self.idb).chain(&self.ic) {
            if let Some(h) = c.head() {
                note(h);
            }
            for l in &c.clause.body {
                note(&l.atom);
            }
        }
        out
    }

    /// Extensional predicates: every non-built-in predicate that is not
    /// defined by a rule.
    pub fn extensional_preds(&self) -> BTreeSet<Arc<str>> {
        let idb = self.intensional_preds();
        self.predicate_arities().into_keys().filter(|p| !idb.contains(p)).collect()
    }

    pub fn rules_for(&self, pred: &str) -> impl Iterator<Item = &AnnotatedClause> {
        let pred = pred.to_string();
        self.idb.iter().filter(move |r| r.head().is_some_and(|h| *h.pred == *pred))
    }

    pub fn constraint(&self, id: &str) -> Option<&AnnotatedClause> {
        self.ic.iter().find(|c| c.id == id)
    }

    /// Constraints the rewriter may use.
    pub fn usable_constraints(&self) -> impl Iterator<Item = &AnnotatedClause> {
        self.ic.iter().filter(|c| c.belief.v >= MIN_USABLE_CERTAINTY)
    }

    /// A copy keeping only the constraints whose id is listed.
    pub fn with_constraints(&self, ids: &[&str]) -> Database {
        Database {
            edb: self.edb.clone(),
            idb: self.idb.clone(),
            ic: self.ic.iter().filter(|c| ids.contains(&c.id.as_str())).cloned().collect(),
        }
    }

    /// Ground atoms of all facts.
    pub fn fact_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.edb.iter().filter_map(|f| f.head())
    }
}

/// A conjunctive query `name(output_vars) :- body`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Query {
    pub name: String,
    pub output_vars: Vec<Var>,
    pub body: Vec<Literal>,
}

impl Query {
    pub fn new(name: impl Into<String>, output_vars: Vec<Var>, body: Vec<Literal>) -> Query {
        Query { name: name.into(), output_vars, body }
    }

    /// A query whose output variables are all the variables of its body.
    pub fn all_vars(name: impl Into<String>, body: Vec<Literal>) -> Query {
        let out = body_vars(&body);
        Query::new(name, out, body)
    }

    /// The head atom of the query rule.
    pub fn head_atom(&self) -> Atom {
        Atom::new(&self.name, self.output_vars.iter().cloned().map(Term::Var).collect())
    }

    /// The query as the certain rule `name(out) :- body`.
    pub fn as_clause(&self) -> Clause {
        Clause::new(Some(self.head_atom()), self.body.clone())
    }

    pub fn with_body(&self, body: Vec<Literal>) -> Query {
        Query { name: self.name.clone(), output_vars: self.output_vars.clone(), body }
    }

    pub fn vars(&self) -> Vec<Var> {
        body_vars(&self.body)
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ?- ", self.head_atom())?;
        write_body(f, &self.body)?;
        write!(f, ".")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_bounds_are_checked() {
        assert!(BeliefInterval::new(0.9, 0.2).is_err());
        assert!(BeliefInterval::new(-0.1, 0.2).is_err());
        assert!(BeliefInterval::new(0.2, 1.1).is_err());
        assert!(BeliefInterval::new(0.7, 0.7).is_ok());
    }

    #[test]
    fn display_quotes_capitalised_symbols() {
        let a = Atom::new("Author", vec![Term::sym("Gelfond"), Term::int(69), Term::sym("russian")]);
        assert_eq!(a.to_string(), "Author(\"Gelfond\", 69, russian)");
        let c = Atom::cmp(CmpOp::Ge, Term::var("X"), Term::int(20));
        assert_eq!(c.to_string(), "X >= 20");
    }

    #[test]
    fn unrestricted_vars_ignore_builtins_and_negation() {
        let c = Clause::new(
            Some(Atom::new("q", vec![Term::var("X"), Term::var("Y")])),
            vec![Literal::pos(Atom::new("r", vec![Term::var("X")]))],
        );
        assert_eq!(c.unrestricted_vars(), vec![Var::new("Y")]);
        let d = Clause::new(
            None,
            vec![
                Literal::pos(Atom::new("r", vec![Term::var("X")])),
                Literal::neg(Atom::new("s", vec![Term::var("Z")])),
                Literal::pos(Atom::cmp(CmpOp::Lt, Term::var("X"), Term::var("W"))),
            ],
        );
        assert_eq!(d.unrestricted_vars(), vec![Var::new("Z"), Var::new("W")]);
    }

    #[test]
    fn query_clause_has_output_head() {
        let q = Query::all_vars("q", vec![Literal::pos(Atom::new("p", vec![Term::var("X"), Term::var("Y")]))]);
        assert_eq!(q.as_clause().to_string(), "q(X, Y) :- p(X, Y)");
    }
}
