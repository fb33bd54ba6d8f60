//! Semantic compilation: residues of the integrity constraints, filed under
//! the predicates they talk about and attached to queries.
//!
//! A residue is what is left of a constraint after its body has been matched
//! against (part of) a clause body. Matching runs over a grounded copy of the
//! target, so target variables behave as unknown constants; residue
//! variables that stay free are local to the residue.

mod entail;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

pub use entail::{Premises, Verdict};

use crate::blp::Combination;
use crate::error::Result;
use crate::model::{
    body_vars, AnnotatedClause, Atom, BeliefInterval, Clause, CmpOp, Const, Database, Literal, Query, SignedPred, Term,
    Var, VarGen,
};
use crate::unify::{rename_apart, Apply, Substitution};

/// One constraint contributing to a residue, with the target literals its
/// body was matched against.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Source {
    pub id: String,
    #[serde(serialize_with = "ser_interval")]
    pub belief: BeliefInterval,
    #[serde(serialize_with = "ser_display_vec")]
    pub support: Vec<Literal>,
}

pub(crate) fn ser_interval<S: serde::Serializer>(b: &BeliefInterval, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&b.v)?;
    t.serialize_element(&b.w)?;
    t.end()
}

pub(crate) fn ser_display_vec<T: fmt::Display, S: serde::Serializer>(v: &[T], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(ToString::to_string))
}

/// A residue together with the constraints it comes from.
#[derive(Clone, Debug, PartialEq)]
pub struct Residue {
    pub head: Option<Atom>,
    pub body: Vec<Literal>,
    pub sources: Vec<Source>,
    /// The signed predicate the residue is filed under.
    pub origin: SignedPred,
    /// The literal the residue was computed for: a dummy literal, a rule
    /// head, or a query literal once attached.
    pub pattern: Literal,
    /// Set when the residue comes from the body of this rule.
    pub via_rule: Option<String>,
    /// Variables whose names are meaningful outside the residue.
    pub context: Vec<Var>,
}

impl Residue {
    /// Fully subsumed residues with a head can be applied directly.
    pub fn is_ready(&self) -> bool {
        self.head.is_some() && self.body.is_empty()
    }

    pub fn clause(&self) -> Clause {
        Clause::new(self.head.clone(), self.body.clone())
    }

    pub fn source_ids(&self) -> Vec<&str> {
        self.sources.iter().map(|s| s.id.as_str()).collect()
    }

    /// `(IC2;IC3)`-style label.
    pub fn label(&self) -> String {
        format!("({})", self.source_ids().join(";"))
    }

    pub fn combined(&self, phi: Combination) -> Result<BeliefInterval> {
        phi.combine(&self.sources.iter().map(|s| s.belief).collect::<Vec<_>>())
    }

    /// Variables of the residue clause that are not context variables.
    pub fn local_vars(&self) -> Vec<Var> {
        self.clause().vars().into_iter().filter(|v| !self.context.contains(v)).collect()
    }

    fn all_vars(&self) -> Vec<Var> {
        let mut out = self.clause().vars();
        self.pattern.atom.collect_vars(&mut out);
        for s in &self.sources {
            for v in body_vars(&s.support) {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }

    /// The residue clause with local variables renamed canonically and
    /// body literals in a canonical order.
    pub fn canonical(&self) -> Clause {
        canonical_clause(&self.clause(), &self.context)
    }

    fn map_terms(&self, s: &Substitution) -> Residue {
        Residue {
            head: self.head.apply(s),
            body: self.body.apply(s),
            sources: self
                .sources
                .iter()
                .map(|x| Source { id: x.id.clone(), belief: x.belief, support: x.support.apply(s) })
                .collect(),
            origin: self.origin.clone(),
            pattern: self.pattern.apply(s),
            via_rule: self.via_rule.clone(),
            context: self.context.clone(),
        }
    }

    fn support_union(&self) -> Vec<Literal> {
        let mut out: Vec<Literal> = Vec::new();
        for s in &self.sources {
            for l in &s.support {
                if !out.contains(l) {
                    out.push(l.clone());
                }
            }
        }
        out
    }
}

impl fmt::Display for Residue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.canonical();
        write!(f, "{} ", self.label())?;
        match (&c.head, c.body.is_empty()) {
            (Some(h), true) => write!(f, "{h}."),
            _ => write!(f, "{c}."),
        }
    }
}

/// Rename the variables outside `keep` to `L1, L2, ...` after putting the
/// body in a canonical order.
pub fn canonical_clause(c: &Clause, keep: &[Var]) -> Clause {
    let placeholder = Term::var("_");
    let mask = |l: &Literal| {
        let mut l = l.clone();
        for t in &mut l.atom.args {
            if matches!(t, Term::Var(v) if !keep.contains(v)) {
                *t = placeholder.clone();
            }
        }
        l
    };
    let mut body = c.body.clone();
    body.sort_by_cached_key(|l| (mask(l), l.clone()));
    body.dedup();
    let ordered = Clause::new(c.head.clone(), body);
    let mut pairs = Vec::new();
    let mut n = 0;
    for v in ordered.vars() {
        if keep.contains(&v) {
            continue;
        }
        let name = loop {
            n += 1;
            let cand = Var::new(&format!("L{n}"));
            if !keep.contains(&cand) {
                break cand;
            }
        };
        pairs.push((v, Term::Var(name)));
    }
    ordered.apply(&Substitution::simultaneous(pairs))
}

/// Residues filed by signed predicate.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResidueTable {
    pub entries: BTreeMap<SignedPred, Vec<Residue>>,
}

impl ResidueTable {
    pub fn get(&self, key: &SignedPred) -> &[Residue] {
        self.entries.get(key).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Residue> {
        self.entries.values().flatten()
    }

    /// Human-readable listing, one block per signed predicate.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (key, residues) in &self.entries {
            let mut lines: Vec<String> = residues
                .iter()
                .map(|r| match &r.via_rule {
                    Some(rule) => format!("  {r}  [via {rule}]"),
                    None => format!("  {r}"),
                })
                .collect();
            lines.sort();
            let pattern = residues.first().map(|r| r.pattern.to_string()).unwrap_or_else(|| key.to_string());
            out.push_str(&format!("{pattern}:\n"));
            for l in lines {
                out.push_str(&l);
                out.push('\n');
            }
        }
        out
    }
}

/// Move every constant out of the database atoms of a constraint into an
/// equality with a new variable.
pub fn preprocess_constants(c: &AnnotatedClause) -> AnnotatedClause {
    let mut gen = VarGen::avoiding(&c.clause.vars());
    let mut extra = Vec::new();
    let mut lift = |a: &Atom, extra: &mut Vec<Literal>| -> Atom {
        if a.is_builtin() {
            return a.clone();
        }
        let args = a
            .args
            .iter()
            .map(|t| match t {
                Term::Const(_) => {
                    let v = gen.fresh();
                    extra.push(Literal::pos(Atom::cmp(CmpOp::Eq, Term::Var(v.clone()), t.clone())));
                    Term::Var(v)
                }
                Term::Var(_) => t.clone(),
            })
            .collect();
        Atom { pred: a.pred.clone(), args }
    };
    let head = c.clause.head.as_ref().map(|h| lift(h, &mut extra));
    let mut body: Vec<Literal> =
        c.clause.body.iter().map(|l| Literal { positive: l.positive, atom: lift(&l.atom, &mut extra) }).collect();
    body.extend(extra);
    AnnotatedClause { clause: Clause::new(head, body), ..c.clone() }
}

/// A body whose variables have been replaced by fresh constants.
pub struct Grounded {
    pub body: Vec<Literal>,
    pub forward: Substitution,
    back: HashMap<Const, Var>,
}

impl Grounded {
    pub fn new(body: &[Literal]) -> Grounded {
        let vars = body_vars(body);
        let mut forward = Substitution::new();
        let mut back = HashMap::new();
        for (i, v) in vars.into_iter().enumerate() {
            let k = Const::Fresh(i as u32 + 1);
            back.insert(k.clone(), v.clone());
            forward.bind(v, Term::Const(k));
        }
        Grounded { body: body.to_vec().apply(&forward), forward, back }
    }

    pub fn revert_term(&self, t: &Term) -> Term {
        match t {
            Term::Const(c) => self.back.get(c).map_or_else(|| t.clone(), |v| Term::Var(v.clone())),
            Term::Var(_) => t.clone(),
        }
    }

    pub fn revert_atom(&self, a: &Atom) -> Atom {
        Atom { pred: a.pred.clone(), args: a.args.iter().map(|t| self.revert_term(t)).collect() }
    }

    pub fn revert_lit(&self, l: &Literal) -> Literal {
        Literal { positive: l.positive, atom: self.revert_atom(&l.atom) }
    }
}

/// The result of one maximal partial match.
#[derive(Clone, Debug, PartialEq)]
struct Match {
    head: Option<Atom>,
    body: Vec<Literal>,
    matched: Vec<usize>,
}

/// Simplify the built-in literals of a body against the premises. `None`
/// means some literal is contradicted, so the clause can never fire.
fn simplify(body: Vec<Literal>, premises: &Premises) -> Option<Vec<Literal>> {
    let mut out: Vec<Literal> = Vec::with_capacity(body.len());
    for l in body {
        if let Some(op) = l.atom.cmp_op() {
            if let (Some(a), Some(b)) = (l.atom.args[0].as_const(), l.atom.args[1].as_const()) {
                let op = if l.positive { op } else { op.negated() };
                match premises.check(op, a, b) {
                    Verdict::Entailed => continue,
                    Verdict::Contradicted => return None,
                    Verdict::Unknown => {}
                }
            }
        }
        if !out.contains(&l) {
            out.push(l);
        }
    }
    Some(out)
}

/// Decide what happens to a ground built-in head. `None` drops the residue
/// (its head is already known), `Some(None)` turns it into a denial.
fn simplify_head(head: Option<Atom>, premises: &Premises) -> Option<Option<Atom>> {
    let Some(h) = head else { return Some(None) };
    if let Some(op) = h.cmp_op() {
        if let (Some(a), Some(b)) = (h.args[0].as_const(), h.args[1].as_const()) {
            return match premises.check(op, a, b) {
                Verdict::Entailed => None,
                Verdict::Contradicted => Some(None),
                Verdict::Unknown => Some(Some(h)),
            };
        }
    }
    Some(Some(h))
}

/// Every maximal injective match of the database literals of `body` onto
/// the ground literals `target` (restricted to the indices in `allowed`)
/// that matches at least one literal.
fn subsume(head: Option<&Atom>, body: &[Literal], target: &[Literal], allowed: &[usize], premises: &Premises) -> Vec<Match> {
    let db: Vec<usize> = (0..body.len()).filter(|&i| !body[i].is_builtin()).collect();
    let cands: Vec<Vec<usize>> = db
        .iter()
        .map(|&i| {
            let l = &body[i];
            allowed
                .iter()
                .copied()
                .filter(|&j| {
                    let t = &target[j];
                    !t.is_builtin() && t.positive == l.positive && t.atom.pred == l.atom.pred && t.atom.arity() == l.atom.arity()
                })
                .collect()
        })
        .collect();

    let mut found: Vec<Match> = Vec::new();
    let mut assign: Vec<Option<usize>> = vec![None; db.len()];
    let mut used: Vec<usize> = Vec::new();

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        pos: usize,
        s: &Substitution,
        db: &[usize],
        cands: &[Vec<usize>],
        body: &[Literal],
        target: &[Literal],
        assign: &mut Vec<Option<usize>>,
        used: &mut Vec<usize>,
        out: &mut Vec<(Substitution, Vec<Option<usize>>)>,
    ) {
        if pos == db.len() {
            if assign.iter().any(Option::is_some) && is_maximal(s, db, cands, body, target, assign, used) {
                out.push((s.clone(), assign.clone()));
            }
            return;
        }
        for &j in &cands[pos] {
            if used.contains(&j) {
                continue;
            }
            let mut s2 = s.clone();
            if s2.match_atom(&body[db[pos]].atom, &target[j].atom) {
                assign[pos] = Some(j);
                used.push(j);
                dfs(pos + 1, &s2, db, cands, body, target, assign, used, out);
                used.pop();
                assign[pos] = None;
            }
        }
        dfs(pos + 1, s, db, cands, body, target, assign, used, out);
    }

    fn is_maximal(
        s: &Substitution,
        db: &[usize],
        cands: &[Vec<usize>],
        body: &[Literal],
        target: &[Literal],
        assign: &[Option<usize>],
        used: &[usize],
    ) -> bool {
        (0..db.len()).filter(|&p| assign[p].is_none()).all(|p| {
            cands[p].iter().all(|&j| used.contains(&j) || !s.clone().match_atom(&body[db[p]].atom, &target[j].atom))
        })
    }

    let mut raw = Vec::new();
    dfs(0, &Substitution::new(), &db, &cands, body, target, &mut assign, &mut used, &mut raw);

    for (s, assign) in raw {
        let matched_body: Vec<usize> = db.iter().zip(&assign).filter(|(_, a)| a.is_some()).map(|(&i, _)| i).collect();
        let rest: Vec<Literal> =
            body.iter().enumerate().filter(|(i, _)| !matched_body.contains(i)).map(|(_, l)| l.apply(&s)).collect();
        let Some(rest) = simplify(rest, premises) else { continue };
        let Some(head) = simplify_head(head.map(|h| h.apply(&s)), premises) else { continue };
        let mut matched: Vec<usize> = assign.into_iter().flatten().collect();
        matched.sort_unstable();
        let m = Match { head, body: rest, matched };
        if !found.contains(&m) {
            found.push(m);
        }
    }
    found
}

/// Partially subsume a single constraint against a clause body. Returns
/// every maximal residue; an empty vector means the constraint body shares
/// nothing with the target.
pub fn partial_subsumption(c: &AnnotatedClause, target_body: &[Literal]) -> Vec<Residue> {
    let pattern = target_body.iter().find(|l| !l.is_builtin()).cloned().unwrap_or_else(|| target_body[0].clone());
    let context = body_vars(target_body);
    residues_against(&preprocess_constants(c), target_body, pattern, None, &context, false)
}

fn residues_against(
    c: &AnnotatedClause,
    target_body: &[Literal],
    pattern: Literal,
    via_rule: Option<&str>,
    context: &[Var],
    check_pattern: bool,
) -> Vec<Residue> {
    let g = Grounded::new(target_body);
    let premises = Premises::from_body(&g.body);
    let mut gen = VarGen::avoiding(context.iter().chain(&c.clause.vars()));
    let (clause, _) = rename_apart(&c.clause, &c.clause.vars(), &mut gen);
    let allowed: Vec<usize> = (0..g.body.len()).collect();
    let mut out = Vec::new();
    for m in subsume(clause.head.as_ref(), &clause.body, &g.body, &allowed, &premises) {
        let head = m.head.map(|h| g.revert_atom(&h));
        let body: Vec<Literal> = m.body.iter().map(|l| g.revert_lit(l)).collect();
        let support: Vec<Literal> = m.matched.iter().map(|&j| target_body[j].clone()).collect();
        if self_supporting(head.as_ref(), &body, check_pattern.then_some(&pattern), &support) {
            continue;
        }
        out.push(Residue {
            head,
            body,
            sources: vec![Source { id: c.id.clone(), belief: c.belief, support }],
            origin: pattern.signed_pred(),
            pattern: pattern.clone(),
            via_rule: via_rule.map(str::to_string),
            context: context.to_vec(),
        });
    }
    out
}

/// A residue that restates its own origin carries no information and would
/// count the same evidence twice.
fn self_supporting(head: Option<&Atom>, body: &[Literal], pattern: Option<&Literal>, support: &[Literal]) -> bool {
    let restates = |a: &Atom| {
        pattern.is_some_and(|p| p.positive && &p.atom == a) || support.iter().any(|l| l.positive && &l.atom == a)
    };
    head.is_some_and(restates) || pattern.is_some_and(|p| body.contains(p))
}

fn dummy_literal(pred: &str, arity: usize, positive: bool) -> Literal {
    let atom = Atom::new(pred, (1..=arity).map(|i| Term::var(&format!("X{i}"))).collect());
    Literal { positive, atom }
}

/// Compile the usable constraints of `db` into a residue table.
///
/// Every predicate gets a dummy rule `p :- p` (and `not p :- not p` when
/// extensional). The body of every rule is compiled too, with the residues
/// filed under the rule head. Constraints are never unfolded through rules.
pub fn compile(db: &Database) -> ResidueTable {
    let constraints: Vec<AnnotatedClause> = db.usable_constraints().map(preprocess_constants).collect();
    let mut table = ResidueTable::default();
    if constraints.is_empty() {
        return table;
    }
    for (pred, arity) in db.predicate_arities() {
        let signs: &[bool] = if db.is_intensional(&pred) { &[true] } else { &[true, false] };
        for &positive in signs {
            let lit = dummy_literal(&pred, arity, positive);
            let context = lit.atom.vars();
            for c in &constraints {
                for r in residues_against(c, std::slice::from_ref(&lit), lit.clone(), None, &context, true) {
                    table.entries.entry(r.origin.clone()).or_default().push(r);
                }
            }
        }
    }
    for rule in &db.idb {
        let Some(head) = rule.head() else { continue };
        let pattern = Literal::pos(head.clone());
        let head_vars = head.vars();
        let context = rule.clause.vars();
        for c in &constraints {
            for r in residues_against(c, &rule.clause.body, pattern.clone(), Some(&rule.id), &context, true) {
                // variables that only occur in the rule body are existential
                // and cannot be linked to a caller's terms
                let clause_vars = r.clause().vars();
                if clause_vars.iter().any(|v| context.contains(v) && !head_vars.contains(v)) {
                    continue;
                }
                table.entries.entry(r.origin.clone()).or_default().push(r);
            }
        }
    }
    table
}

/// A residue instance attached to a query, in grounded form.
#[derive(Clone, Debug)]
struct Inst {
    head: Option<Atom>,
    body: Vec<Literal>,
    sources: Vec<(String, BeliefInterval)>,
    support: BTreeSet<usize>,
    origin: SignedPred,
    pattern: usize,
    via_rule: Option<String>,
}

/// Instantiate the residues of every query literal and re-subsume them
/// against the rest of the query until nothing more matches. Residues
/// equal up to local renaming are merged, uniting their sources.
pub fn attach_residues(q: &Query, table: &ResidueTable, db: &Database) -> Vec<Residue> {
    let g = Grounded::new(&q.body);
    let premises = Premises::from_body(&g.body);
    let mut used_vars = q.vars();
    for r in table.iter() {
        for v in r.all_vars() {
            if !used_vars.contains(&v) {
                used_vars.push(v);
            }
        }
    }
    let mut gen = VarGen::avoiding(&used_vars);

    let mut work: Vec<Inst> = Vec::new();
    for (i, lit) in g.body.iter().enumerate() {
        if lit.is_builtin() {
            continue;
        }
        for r in table.get(&lit.signed_pred()) {
            if r.via_rule.is_some() && db.rules_for(&lit.atom.pred).count() != 1 {
                continue;
            }
            let (r, _) = rename_residue(r, &mut gen);
            let mut s = Substitution::new();
            if r.pattern.positive != lit.positive || !s.match_atom(&r.pattern.atom, &lit.atom) {
                continue;
            }
            let Some(body) = simplify(r.body.apply(&s), &premises) else { continue };
            let Some(head) = simplify_head(r.head.apply(&s), &premises) else { continue };
            work.push(Inst {
                head,
                body,
                sources: r.sources.iter().map(|x| (x.id.clone(), x.belief)).collect(),
                support: BTreeSet::from([i]),
                origin: lit.signed_pred(),
                pattern: i,
                via_rule: r.via_rule.clone(),
            });
        }
    }

    let done = resubsume_all(work, &g.body, &premises);
    let context = q.vars();
    let residues = done
        .into_iter()
        .filter_map(|inst| {
            let support: Vec<Literal> = inst.support.iter().map(|&j| q.body[j].clone()).collect();
            let head = inst.head.as_ref().map(|h| g.revert_atom(h));
            let body: Vec<Literal> = inst.body.iter().map(|l| g.revert_lit(l)).collect();
            if self_supporting(head.as_ref(), &body, Some(&q.body[inst.pattern]), &support) {
                return None;
            }
            Some(Residue {
                head,
                body,
                sources: inst
                    .sources
                    .iter()
                    .map(|(id, belief)| Source { id: id.clone(), belief: *belief, support: support.clone() })
                    .collect(),
                origin: inst.origin,
                pattern: q.body[inst.pattern].clone(),
                via_rule: inst.via_rule,
                context: context.clone(),
            })
        })
        .collect();
    merge_residues(residues)
}

fn rename_residue(r: &Residue, gen: &mut VarGen) -> (Residue, Substitution) {
    let vars = r.all_vars();
    let s: Substitution = vars.into_iter().map(|v| (v, Term::Var(gen.fresh()))).collect();
    let mut out = r.map_terms(&s);
    out.context = out.context.iter().map(|v| s.walk(&Term::Var(v.clone())).as_var().cloned().unwrap_or(v.clone())).collect();
    (out, s)
}

fn resubsume_all(mut work: Vec<Inst>, target: &[Literal], premises: &Premises) -> Vec<Inst> {
    let mut done = Vec::new();
    while let Some(inst) = work.pop() {
        if inst.body.iter().all(Literal::is_builtin) {
            done.push(inst);
            continue;
        }
        let allowed: Vec<usize> = (0..target.len()).filter(|j| !inst.support.contains(j)).collect();
        let matches = subsume(inst.head.as_ref(), &inst.body, target, &allowed, premises);
        if matches.is_empty() {
            done.push(inst);
            continue;
        }
        for m in matches {
            let mut support = inst.support.clone();
            support.extend(m.matched);
            work.push(Inst { head: m.head, body: m.body, support, ..inst.clone() });
        }
    }
    done
}

/// Merge residues equal up to renaming of local variables. Sources are
/// united; when a constraint already contributes, the first support wins.
pub fn merge_residues(residues: Vec<Residue>) -> Vec<Residue> {
    let mut keys: Vec<Clause> = Vec::new();
    let mut out: Vec<Residue> = Vec::new();
    for r in residues {
        let key = r.canonical();
        match keys.iter().position(|k| *k == key) {
            Some(i) => {
                for s in r.sources {
                    if !out[i].sources.iter().any(|x| x.id == s.id) {
                        out[i].sources.push(s);
                    }
                }
            }
            None => {
                keys.push(key);
                out.push(r);
            }
        }
    }
    for r in &mut out {
        r.sources.sort_by(|a, b| a.id.cmp(&b.id));
    }
    let mut order: Vec<usize> = (0..out.len()).collect();
    order.sort_by_key(|&i| (keys[i].to_string(), out[i].label()));
    order.into_iter().map(|i| out[i].clone()).collect()
}

/// Re-run partial subsumption of a residue against a (rewritten) query
/// body. Literals already supporting the residue are not matched again.
/// Returns the residue unchanged when nothing matches, and nothing when
/// every refinement is contradicted or redundant.
pub fn resubsume(r: &Residue, body: &[Literal]) -> Vec<Residue> {
    let g = Grounded::new(body);
    let premises = Premises::from_body(&g.body);
    let support = r.support_union();
    let grounded = r.map_terms(&g.forward);
    let allowed: Vec<usize> = (0..body.len()).filter(|&j| !support.contains(&body[j])).collect();
    let Some(start_body) = simplify(grounded.body.clone(), &premises) else { return Vec::new() };
    let Some(start_head) = simplify_head(grounded.head.clone(), &premises) else { return Vec::new() };

    let mut work = vec![(start_head, start_body, Vec::<usize>::new())];
    let mut done = Vec::new();
    while let Some((head, rest, matched)) = work.pop() {
        let allowed_now: Vec<usize> = allowed.iter().copied().filter(|j| !matched.contains(j)).collect();
        let ms = if rest.iter().all(Literal::is_builtin) {
            Vec::new()
        } else {
            subsume(head.as_ref(), &rest, &g.body, &allowed_now, &premises)
        };
        if ms.is_empty() {
            done.push((head, rest, matched));
            continue;
        }
        for m in ms {
            let mut all = matched.clone();
            all.extend(m.matched);
            work.push((m.head, m.body, all));
        }
    }
    let out = done
        .into_iter()
        .filter_map(|(head, rest, matched)| {
            let head = head.map(|h| g.revert_atom(&h));
            let rest: Vec<Literal> = rest.iter().map(|l| g.revert_lit(l)).collect();
            let extra: Vec<Literal> = matched.iter().map(|&j| body[j].clone()).collect();
            if head.as_ref().is_some_and(|h| extra.iter().any(|l| l.positive && &l.atom == h)) {
                return None;
            }
            let mut out = r.clone();
            out.head = head;
            out.body = rest;
            for s in &mut out.sources {
                for l in &extra {
                    if !s.support.contains(l) {
                        s.support.push(l.clone());
                    }
                }
            }
            Some(out)
        })
        .collect();
    merge_residues(out)
}
