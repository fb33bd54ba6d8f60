//! Query expansion over intensional predicates.
//!
//! An intensional literal of a query is either removed, when ready
//! residues derive it with enough belief, or replaced by the body of each
//! rule defining it. The result is a set of queries over extensional and
//! built-in literals whose union answers the original query.

use std::fmt::Write as _;

use crate::blp::{belief_of, Combination, GroundBlp, GroundClause};
use crate::compile::{attach_residues, merge_residues, partial_subsumption, Grounded, Residue, ResidueTable, Source};
use crate::error::{Error, Result};
use crate::model::{AnnotatedClause, Atom, BeliefInterval, CmpOp, Database, Literal, Query, Term, Var, VarGen};
use crate::transform::RewriteConfig;
use crate::unify::{Apply, Substitution};

/// Unfolding deeper than this means the rules are recursive.
const MAX_UNFOLD_DEPTH: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct RemovedAtom {
    pub literal: Literal,
    pub sources: Vec<Source>,
    /// Belief in the atom given the sources.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    /// `literal` was replaced by the body of `rule`, whose variables were
    /// renamed by `renaming`.
    Unfold { literal: Literal, rule: String, renaming: Substitution },
    Remove { literal: Literal },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionState {
    pub query: Query,
    pub removed: Vec<RemovedAtom>,
    pub trace: Vec<Step>,
    /// Product of the removal bounds so far.
    pub bound: f64,
}

impl ExpansionState {
    pub fn new(q: &Query) -> ExpansionState {
        ExpansionState { query: q.clone(), removed: Vec::new(), trace: Vec::new(), bound: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpandedSet {
    pub original: Query,
    pub queries: Vec<ExpansionState>,
}

impl ExpandedSet {
    pub fn render(&self) -> String {
        let mut out = format!("{}\n", self.original);
        for st in &self.queries {
            let _ = writeln!(out, "  {}", st.query);
            for step in &st.trace {
                match step {
                    Step::Unfold { literal, rule, .. } => {
                        let _ = writeln!(out, "    unfold {literal} by {rule}");
                    }
                    Step::Remove { literal } => {
                        let r = st.removed.iter().find(|r| &r.literal == literal);
                        let ids = r.map(|r| r.sources.iter().map(|s| s.id.as_str()).collect::<Vec<_>>().join(";"));
                        let _ = writeln!(
                            out,
                            "    remove {literal} by ({}) with belief {:.6}",
                            ids.unwrap_or_default(),
                            r.map_or(0.0, |r| r.bound)
                        );
                    }
                }
            }
            let _ = writeln!(out, "    bound {:.6}", st.bound);
        }
        out
    }
}

/// A renaming of every variable of `rule` to a fresh one.
fn rename_rule(rule: &AnnotatedClause, gen: &mut VarGen) -> Substitution {
    rule.clause.vars().into_iter().map(|v| (v, Term::Var(gen.fresh()))).collect()
}

/// Replace `body[index]` by the body of `rule` renamed with `renaming`.
/// Head positions holding a constant or a repeated variable turn into
/// equalities; other head variables take the literal's argument.
pub fn unfold(body: &[Literal], index: usize, rule: &AnnotatedClause, renaming: &Substitution) -> Vec<Literal> {
    let lit = &body[index];
    let head = rule.head().expect("rules have heads").apply(renaming);
    let mut bind = Substitution::new();
    let mut eqs = Vec::new();
    for (h, t) in head.args.iter().zip(&lit.atom.args) {
        match h {
            Term::Var(v) if !bind.contains(v) => bind.bind(v.clone(), t.clone()),
            _ => {
                let h = bind.walk(h);
                if h != *t {
                    eqs.push(Literal::pos(Atom::cmp(CmpOp::Eq, t.clone(), h)));
                }
            }
        }
    }
    let mut out = body[..index].to_vec();
    out.extend(rule.clause.body.apply(renaming).apply(&bind));
    out.extend(eqs);
    out.extend_from_slice(&body[index + 1..]);
    out
}

/// Reapply `trace` to `original`.
pub fn replay(original: &Query, trace: &[Step], db: &Database) -> Result<Query> {
    let mut body = original.body.clone();
    for step in trace {
        match step {
            Step::Unfold { literal, rule, renaming } => {
                let i = position(&body, literal)?;
                let r = db.idb.iter().find(|r| &r.id == rule).ok_or_else(|| Error::Config(format!("unknown rule {rule}")))?;
                body = unfold(&body, i, r, renaming);
            }
            Step::Remove { literal } => {
                body.remove(position(&body, literal)?);
            }
        }
    }
    Ok(original.with_body(body))
}

fn position(body: &[Literal], lit: &Literal) -> Result<usize> {
    body.iter().position(|l| l == lit).ok_or_else(|| Error::Config(format!("{lit} is not in the query body")))
}

/// Belief in `removed` when only the constraint instances in `sources`
/// derive it, computed on a symbolic grounding of the query. Rule
/// derivations are not verified, so they count for nothing.
pub fn intensional_removal_bound(
    state: &ExpansionState,
    removed: &Atom,
    sources: &[Source],
    phi: Combination,
) -> Result<f64> {
    let q = &state.query;
    let g = Grounded::new(&q.body);
    let ground = |l: &Literal| l.apply(&g.forward);
    let target = removed.apply(&g.forward);
    let goal = Atom::new(&q.name, q.output_vars.iter().map(|v| g.forward.walk(&Term::Var(v.clone()))).collect());

    let mut blp = GroundBlp::new();
    let mut facts: Vec<Atom> = Vec::new();
    let mut add_fact = |l: &Literal, blp: &mut GroundBlp| {
        if l.is_builtin() || l.atom == target || facts.contains(&l.atom) {
            return;
        }
        facts.push(l.atom.clone());
        let belief = if l.positive { BeliefInterval::CERTAIN } else { BeliefInterval::FALSE };
        blp.push(GroundClause::fact(format!("f{}", facts.len()), l.atom.clone(), belief));
    };
    let body: Vec<Literal> = q.body.iter().filter(|l| !l.is_builtin()).map(ground).collect();
    for l in &body {
        add_fact(l, &mut blp);
    }
    blp.push(GroundClause { id: "r_g".into(), head: goal.clone(), body, belief: BeliefInterval::CERTAIN });
    for s in sources {
        let support: Vec<Literal> = s.support.iter().filter(|l| !l.is_builtin()).map(ground).collect();
        for l in &support {
            add_fact(l, &mut blp);
        }
        blp.push(GroundClause { id: s.id.clone(), head: target.clone(), body: support, belief: s.belief });
    }
    belief_of(&blp, &goal, phi)
}

/// Combine per-query `(corr, comp)` bounds of an expanded query into
/// bounds for the whole set.
pub fn set_level_bounds(bounds: impl IntoIterator<Item = (f64, f64)>) -> Result<(f64, f64)> {
    bounds
        .into_iter()
        .reduce(|(a, b), (c, d)| (a.min(c), b.min(d)))
        .ok_or(Error::EmptyInput("no expanded queries"))
}

/// Ready residues for `q`: those attached through the residue table plus
/// those from subsuming every constraint against the whole body.
fn ready_residues(q: &Query, table: &ResidueTable, db: &Database) -> Vec<Residue> {
    let mut all = attach_residues(q, table, db);
    for c in db.usable_constraints() {
        all.extend(partial_subsumption(c, &q.body));
    }
    merge_residues(all.into_iter().filter(Residue::is_ready).collect())
}

struct Expander<'a> {
    db: &'a Database,
    table: &'a ResidueTable,
    cfg: &'a RewriteConfig,
    gen: VarGen,
    out: Vec<ExpansionState>,
}

impl Expander<'_> {
    fn is_intensional(&self, l: &Literal) -> bool {
        !l.is_builtin() && self.db.is_intensional(&l.atom.pred)
    }

    /// Remove the first intensional literal that a ready residue derives
    /// with a bound above the threshold.
    fn try_remove(&self, st: &mut ExpansionState) -> Result<bool> {
        let residues = ready_residues(&st.query, self.table, self.db);
        for (i, lit) in st.query.body.iter().enumerate() {
            if !self.is_intensional(lit) {
                continue;
            }
            let mut sources: Vec<Source> = Vec::new();
            for r in residues.iter().filter(|r| r.head.as_ref() == Some(&lit.atom)) {
                for s in &r.sources {
                    if !s.support.contains(lit) && !sources.iter().any(|x| x.id == s.id) {
                        sources.push(s.clone());
                    }
                }
            }
            if sources.is_empty() {
                continue;
            }
            let rest: Vec<Literal> = st.query.body.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, l)| l.clone()).collect();
            let restricted = st.query.with_body(rest.clone()).as_clause().unrestricted_vars().is_empty()
                && lit.atom.vars().iter().all(|v| rest.iter().any(|l| l.positive && !l.is_builtin() && l.atom.vars().contains(v)));
            if !restricted {
                continue;
            }
            sources.sort_by(|a, b| a.id.cmp(&b.id));
            let bound = intensional_removal_bound(st, &lit.atom, &sources, self.cfg.phi)?;
            if st.bound * bound + 1e-12 < self.cfg.t_corr {
                continue;
            }
            let lit = lit.clone();
            st.bound *= bound;
            st.trace.push(Step::Remove { literal: lit.clone() });
            st.removed.push(RemovedAtom { literal: lit, sources, bound });
            st.query.body = rest;
            return Ok(true);
        }
        Ok(false)
    }

    fn expand(&mut self, mut st: ExpansionState) -> Result<()> {
        loop {
            if st.trace.len() > MAX_UNFOLD_DEPTH {
                return Err(Error::Cycle(st.query.to_string()));
            }
            let Some(i) = st.query.body.iter().position(|l| self.is_intensional(l)) else {
                self.out.push(st);
                return Ok(());
            };
            if self.try_remove(&mut st)? {
                continue;
            }
            let lit = st.query.body[i].clone();
            let rules: Vec<&AnnotatedClause> = self.db.rules_for(&lit.atom.pred).collect();
            for rule in rules {
                let renaming = rename_rule(rule, &mut self.gen);
                let mut child = st.clone();
                child.query.body = unfold(&st.query.body, i, rule, &renaming);
                child.trace.push(Step::Unfold { literal: lit.clone(), rule: rule.id.clone(), renaming });
                self.expand(child)?;
            }
            return Ok(());
        }
    }
}

/// Expand `q` until every query of the set is free of intensional
/// literals. Children are named `{q}_1`, `{q}_2`, ... in rule order.
pub fn expand_query(q: &Query, db: &Database, table: &ResidueTable, cfg: &RewriteConfig) -> Result<ExpandedSet> {
    if let Some(l) = q.body.iter().find(|l| !l.positive && db.is_intensional(&l.atom.pred)) {
        return Err(Error::NegatedIntensional(l.to_string()));
    }
    let mut used: Vec<Var> = q.vars();
    for c in db.idb.iter().chain(&db.ic) {
        used.extend(c.clause.vars());
    }
    for r in table.iter() {
        used.extend(r.clause().vars());
        used.extend(r.pattern.atom.vars());
    }
    let mut ex = Expander { db, table, cfg, gen: VarGen::avoiding(&used), out: Vec::new() };
    ex.expand(ExpansionState::new(q))?;
    let mut queries = ex.out;
    if queries.len() > 1 || queries.first().is_some_and(|s| s.trace.iter().any(|t| matches!(t, Step::Unfold { .. }))) {
        for (k, st) in queries.iter_mut().enumerate() {
            st.query.name = format!("{}_{}", q.name, k + 1);
        }
    }
    Ok(ExpandedSet { original: q.clone(), queries })
}
