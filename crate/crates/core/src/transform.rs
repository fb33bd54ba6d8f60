//! Greedy semantic rewriting of a conjunctive query.
//!
//! Ready residues (empty body, non-empty head) justify three kinds of edits:
//! removing a body atom with a large extension, inserting a restriction on
//! an indexed attribute, and inserting an atom with a small extension. A
//! bound DAG records the evidence behind every edit; from it the rewriter
//! keeps a lower bound on the correctness (`corr`) and completeness
//! (`comp`) of the rewritten query.

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashSet};
use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::blp::{belief_of, build_dependency_dag, build_proof_dag, Combination, GroundBlp, GroundClause, ProofDag};
use crate::compile::{merge_residues, resubsume, Grounded, Premises, Residue, Source, Verdict};
use crate::error::{Error, Result};
use crate::eval::{for_each_solution, CostModel, ExtensionStore};
use crate::model::{body_vars, Atom, BeliefInterval, Const, Database, Literal, Query, Term, Var, VarGen};
use crate::unify::{Apply, Substitution};

/// Slack used when comparing a bound against its threshold.
const EPS: f64 = 1e-12;

fn ser_display<T: fmt::Display, S: serde::Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

/// Thresholds and knobs of the rewriter.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RewriteConfig {
    pub t_corr: f64,
    pub t_comp: f64,
    pub phi: Combination,
    /// Extensions at least this large may be removed. Defaults to the
    /// 75th percentile of the extensional predicate sizes.
    pub large_cutoff: Option<usize>,
    /// Extensions at most this large may be inserted. Defaults to the 25th
    /// percentile.
    pub small_cutoff: Option<usize>,
}

impl Default for RewriteConfig {
    fn default() -> Self {
        RewriteConfig { t_corr: 0.8, t_comp: 0.8, phi: Combination::Dempster, large_cutoff: None, small_cutoff: None }
    }
}

impl RewriteConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("t_corr", self.t_corr), ("t_comp", self.t_comp)] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {t}")));
            }
        }
        if self.large_cutoff == Some(0) || self.small_cutoff == Some(0) {
            return Err(Error::Config("extension cutoffs must be positive".into()));
        }
        self.phi.check_certain_identity()
    }

    /// The `(large, small)` cutoffs in effect for `cost`.
    pub fn cutoffs(&self, cost: &CostModel) -> (usize, usize) {
        let sizes = cost.extensional_sizes();
        let large = self.large_cutoff.unwrap_or_else(|| percentile(&sizes, 75).max(1));
        let small = self.small_cutoff.unwrap_or_else(|| percentile(&sizes, 25).max(1));
        (large, small)
    }
}

/// Nearest-rank percentile of an ascending slice; 0 when it is empty.
fn percentile(sorted: &[usize], p: usize) -> usize {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (p * sorted.len()).div_ceil(100).max(1);
    sorted[rank - 1]
}

/// A body literal of the original or the rewritten query.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundNode {
    #[serde(serialize_with = "ser_display")]
    pub literal: Literal,
    /// Has an edge to the rule of the original query.
    pub original: bool,
    /// Has an edge to the rule of the rewritten query.
    pub in_rewritten: bool,
    /// Evidence gathered for removing or inserting the literal.
    pub sources: Vec<Source>,
}

impl BoundNode {
    pub fn is_removed(&self) -> bool {
        self.original && !self.in_rewritten
    }

    pub fn is_inserted(&self) -> bool {
        self.in_rewritten && !self.sources.is_empty()
    }
}

/// The two query rules `q :- body` and `q' :- body'` over shared body nodes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundDag {
    pub query: String,
    pub nodes: Vec<BoundNode>,
}

/// The DAG of an unmodified query: every body literal feeds both rules.
pub fn initialize_dag(q: &Query) -> BoundDag {
    BoundDag {
        query: q.name.clone(),
        nodes: q
            .body
            .iter()
            .map(|l| BoundNode { literal: l.clone(), original: true, in_rewritten: true, sources: Vec::new() })
            .collect(),
    }
}

impl BoundDag {
    /// Body nodes plus the two roots and the two rule nodes.
    pub fn node_count(&self) -> usize {
        self.nodes.len() + 4
    }

    pub fn edge_count(&self) -> usize {
        2 + self.nodes.iter().map(|n| usize::from(n.original) + usize::from(n.in_rewritten)).sum::<usize>()
    }

    pub fn position(&self, lit: &Literal) -> Option<usize> {
        self.nodes.iter().position(|n| &n.literal == lit)
    }

    pub fn original_body(&self) -> Vec<Literal> {
        self.nodes.iter().filter(|n| n.original).map(|n| n.literal.clone()).collect()
    }

    pub fn rewritten_body(&self) -> Vec<Literal> {
        self.nodes.iter().filter(|n| n.in_rewritten).map(|n| n.literal.clone()).collect()
    }

    pub fn removed(&self) -> impl Iterator<Item = &BoundNode> {
        self.nodes.iter().filter(|n| n.is_removed())
    }

    pub fn inserted(&self) -> impl Iterator<Item = &BoundNode> {
        self.nodes.iter().filter(|n| n.is_inserted())
    }

    pub fn to_dot(&self) -> String {
        let esc = |s: String| s.replace('\\', "\\\\").replace('"', "\\\"");
        let q = esc(self.query.clone());
        let mut out = String::from("digraph bounds {\n  rankdir=BT;\n");
        let _ = writeln!(out, "  q [label=\"{q}\"];\n  qp [label=\"{q}'\"];");
        out.push_str("  rg [shape=box, label=\"r_g\"];\n  rgp [shape=box, label=\"r_g'\"];\n");
        out.push_str("  rg -> q [label=\"[1,1]\"];\n  rgp -> qp [label=\"[1,1]\"];\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let mut label = n.literal.to_string();
            if !n.sources.is_empty() {
                let ids: Vec<String> =
                    n.sources.iter().map(|s| format!("{} [{}, {}]", s.id, s.belief.v, s.belief.w)).collect();
                let _ = write!(label, "\nI = {{{}}}", ids.join(", "));
            }
            let _ = writeln!(out, "  a{i} [label=\"{}\"];", esc(label));
            if n.original {
                let _ = writeln!(out, "  a{i} -> rg;");
            }
            if n.in_rewritten {
                let _ = writeln!(out, "  a{i} -> rgp;");
            }
        }
        out.push_str("}\n");
        out
    }
}

fn phi_v(phi: Combination, sources: &[Source]) -> Result<f64> {
    phi.combine_v(&sources.iter().map(|s| s.belief).collect::<Vec<_>>())
}

/// Sources of `new` whose constraint is not in `existing` yet.
fn fresh_sources(existing: &[Source], new: &[Source]) -> Vec<Source> {
    let mut out: Vec<Source> = Vec::new();
    for s in new {
        if !existing.iter().any(|e| e.id == s.id) && !out.iter().any(|e| e.id == s.id) {
            out.push(s.clone());
        }
    }
    out
}

/// `factor * φ(I ∪ B) / φ(I)`, or `factor * φ(B)` when `I` is empty.
/// `None` when the old evidence is worthless and the ratio is undefined.
fn scaled(factor: f64, phi: Combination, existing: &[Source], fresh: &[Source]) -> Result<Option<f64>> {
    if existing.is_empty() {
        return Ok(Some(factor * phi_v(phi, fresh)?));
    }
    let old = phi_v(phi, existing)?;
    if old <= 0.0 {
        return Ok(None);
    }
    let all: Vec<Source> = existing.iter().chain(fresh).cloned().collect();
    Ok(Some(factor * phi_v(phi, &all)? / old))
}

fn ready_head(r: &Residue) -> Result<Option<&Atom>> {
    if !r.body.is_empty() {
        return Err(Error::ResidueBodyNonEmpty(r.to_string()));
    }
    Ok(r.head.as_ref())
}

/// Try to remove the head of `r` from the rewritten query, or to add
/// evidence for an atom removed earlier. On acceptance the DAG is updated
/// and the new correctness bound returned; on rejection nothing changes.
pub fn valid_removal(r: &Residue, corr: f64, dag: &mut BoundDag, cfg: &RewriteConfig) -> Result<(bool, f64)> {
    let Some(head) = ready_head(r)? else { return Ok((false, corr)) };
    let Some(i) = dag.position(&Literal::pos(head.clone())) else { return Ok((false, corr)) };
    let node = &dag.nodes[i];
    // inserted atoms, including re-inserted originals, stay put
    if !node.original || (node.in_rewritten && !node.sources.is_empty()) {
        return Ok((false, corr));
    }
    let fresh = fresh_sources(&node.sources, &r.sources);
    if fresh.is_empty() {
        return Ok((false, corr));
    }
    let Some(new) = scaled(corr, cfg.phi, &node.sources, &fresh)? else { return Ok((false, corr)) };
    if new + EPS < cfg.t_corr {
        return Ok((false, corr));
    }
    let node = &mut dag.nodes[i];
    node.in_rewritten = false;
    node.sources.extend(fresh);
    Ok((true, new))
}

/// Try to insert the head of `r` (an atom or a restriction) into the
/// rewritten query, or to add evidence for an earlier insertion.
/// Insertion never changes the correctness bound.
pub fn valid_insertion(
    r: &Residue,
    corr: f64,
    comp: f64,
    dag: &mut BoundDag,
    cfg: &RewriteConfig,
) -> Result<(bool, f64, f64)> {
    let Some(head) = ready_head(r)? else { return Ok((false, corr, comp)) };
    let lit = Literal::pos(head.clone());
    let (existing, slot): (Vec<Source>, Option<usize>) = match dag.position(&lit) {
        None => (Vec::new(), None),
        Some(i) => {
            let n = &dag.nodes[i];
            if n.in_rewritten && n.sources.is_empty() {
                return Ok((false, corr, comp));
            }
            // a removed atom coming back starts over with no evidence
            let prior = if n.in_rewritten { n.sources.clone() } else { Vec::new() };
            (prior, Some(i))
        }
    };
    let fresh = fresh_sources(&existing, &r.sources);
    if fresh.is_empty() {
        return Ok((false, corr, comp));
    }
    let Some(new) = scaled(comp, cfg.phi, &existing, &fresh)? else { return Ok((false, corr, comp)) };
    if new + EPS < cfg.t_comp {
        return Ok((false, corr, comp));
    }
    match slot {
        None => dag.nodes.push(BoundNode { literal: lit, original: false, in_rewritten: true, sources: fresh }),
        Some(i) => {
            let n = &mut dag.nodes[i];
            if !n.in_rewritten {
                n.sources.clear();
                n.in_rewritten = true;
            }
            n.sources.extend(fresh);
        }
    }
    Ok((true, corr, new))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Remove,
    InsertRestriction,
    InsertAtom,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Remove => "remove",
            Action::InsertRestriction => "insert restriction",
            Action::InsertAtom => "insert atom",
        })
    }
}

/// One accepted edit with the bounds right after it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AppliedResidue {
    pub action: Action,
    #[serde(serialize_with = "ser_display")]
    pub literal: Literal,
    pub sources: Vec<Source>,
    pub corr: f64,
    pub comp: f64,
}

impl fmt::Display for AppliedResidue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<&str> = self.sources.iter().map(|s| s.id.as_str()).collect();
        write!(f, "{} {} by ({}): corr {:.6}, comp {:.6}", self.action, self.literal, ids.join(";"), self.corr, self.comp)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RewriteOutcome {
    #[serde(serialize_with = "ser_display")]
    pub original: Query,
    #[serde(serialize_with = "ser_display")]
    pub rewritten: Query,
    pub corr: f64,
    pub comp: f64,
    pub log: Vec<AppliedResidue>,
    #[serde(skip)]
    pub dag: BoundDag,
}

impl RewriteOutcome {
    pub fn unchanged(q: &Query) -> RewriteOutcome {
        RewriteOutcome {
            original: q.clone(),
            rewritten: q.clone(),
            corr: 1.0,
            comp: 1.0,
            log: Vec::new(),
            dag: initialize_dag(q),
        }
    }

    pub fn removed(&self) -> Vec<&Literal> {
        self.dag.removed().map(|n| &n.literal).collect()
    }

    pub fn inserted(&self) -> Vec<&Literal> {
        self.dag.inserted().map(|n| &n.literal).collect()
    }

    /// Human-readable summary, with the bound DAG in DOT.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "original:  {}", self.original);
        let _ = writeln!(out, "rewritten: {}", self.rewritten);
        for e in &self.log {
            let _ = writeln!(out, "  {e}");
        }
        let _ = writeln!(out, "corr = {:.6}, comp = {:.6}", self.corr, self.comp);
        out.push_str(&self.dag.to_dot());
        out
    }
}

fn positive_db_vars(body: &[Literal]) -> BTreeSet<Var> {
    body.iter().filter(|l| l.positive && !l.is_builtin()).flat_map(|l| l.atom.vars()).collect()
}

/// Would `body` still be a range-restricted query for `outputs` that binds
/// every variable of `kept`?
fn still_restricted(body: &[Literal], outputs: &[Var], kept: &Atom) -> bool {
    let bound = positive_db_vars(body);
    !bound.is_empty()
        && outputs.iter().all(|v| bound.contains(v))
        && kept.vars().iter().all(|v| bound.contains(v))
        && body_vars(body).iter().all(|v| bound.contains(v))
}

/// Decide a comparison against the built-ins of `body`.
fn verdict_in(body: &[Literal], restriction: &Atom) -> Verdict {
    let mut all = body.to_vec();
    all.push(Literal::pos(restriction.clone()));
    let g = Grounded::new(&all);
    let (premises, goal) = g.body.split_at(body.len());
    let goal = &goal[0].atom;
    let (Some(op), Some(a), Some(b)) = (goal.cmp_op(), goal.args[0].as_const(), goal.args[1].as_const()) else {
        return Verdict::Unknown;
    };
    Premises::from_body(premises).check(op, a, b)
}

/// Does restriction `a` imply restriction `b`?
fn implies(a: &Atom, b: &Atom) -> bool {
    verdict_in(&[Literal::pos(a.clone())], b) == Verdict::Entailed
}

/// Is `head` already present in `body` up to the names of its `local`
/// variables?
fn covered(head: &Atom, local: &[Var], body: &[Literal]) -> bool {
    body.iter().filter(|l| l.positive).any(|l| {
        let mut s = Substitution::new();
        l.atom.pred == head.pred
            && l.atom.args.len() == head.args.len()
            && head.args.iter().zip(&l.atom.args).all(|(h, t)| match h {
                Term::Var(v) if local.contains(v) => match s.get(v) {
                    Some(prev) => prev == t,
                    None => {
                        s.bind(v.clone(), t.clone());
                        true
                    }
                },
                _ => h == t,
            })
    })
}

fn supported_by(s: &Source, body: &[Literal]) -> bool {
    s.support.iter().all(|l| body.contains(l))
}

fn ids(sources: &[Source]) -> String {
    sources.iter().map(|s| s.id.as_str()).collect::<Vec<_>>().join(";")
}

struct Greedy<'a> {
    q: &'a Query,
    cfg: &'a RewriteConfig,
    cost: &'a CostModel,
    large: usize,
    small: usize,
    dag: BoundDag,
    corr: f64,
    comp: f64,
    pool: Vec<Residue>,
    locked: Vec<Literal>,
    tried: HashSet<String>,
    log: Vec<AppliedResidue>,
    gen: VarGen,
}

impl Greedy<'_> {
    fn record(&mut self, action: Action, literal: Literal, sources: Vec<Source>) {
        self.log.push(AppliedResidue { action, literal, sources, corr: self.corr, comp: self.comp });
    }

    /// Ready residues whose head passes `keep`.
    fn ready(&self, keep: impl Fn(&Atom) -> bool) -> Vec<Residue> {
        self.pool.iter().filter(|r| r.is_ready() && r.head.as_ref().is_some_and(&keep)).cloned().collect()
    }

    fn removals(&mut self) -> Result<bool> {
        let mut cands = self.ready(|h| {
            !h.is_builtin() && self.cost.is_extensional(&h.pred) && self.cost.size(&h.pred) >= self.large
        });
        cands.sort_by_cached_key(|r| {
            let h = r.head.as_ref().expect("ready residue");
            (Reverse(self.cost.size(&h.pred)), h.pred.clone(), r.label())
        });
        let mut changed = false;
        for r in cands {
            let head = r.head.clone().expect("ready residue");
            let lit = Literal::pos(head.clone());
            if self.locked.contains(&lit) {
                continue;
            }
            let Some(i) = self.dag.position(&lit) else { continue };
            let current = self.dag.rewritten_body();
            let usable: Vec<Source> =
                r.sources.iter().filter(|s| supported_by(s, &current) && !s.support.contains(&lit)).cloned().collect();
            let fresh = fresh_sources(&self.dag.nodes[i].sources, &usable);
            if fresh.is_empty() {
                continue;
            }
            let node = &self.dag.nodes[i];
            if node.in_rewritten {
                let rest: Vec<Literal> = current.into_iter().filter(|l| *l != lit).collect();
                if !still_restricted(&rest, &self.q.output_vars, &head) {
                    continue;
                }
            } else {
                // more evidence for a removed atom is only worth having
                // when it raises the bound
                let gain = scaled(1.0, self.cfg.phi, &node.sources, &fresh)?;
                if !gain.is_some_and(|g| g > 1.0 + EPS) {
                    continue;
                }
            }
            if !self.tried.insert(format!("remove {lit} {}", ids(&fresh))) {
                continue;
            }
            let attempt = Residue { sources: fresh.clone(), ..r.clone() };
            let (ok, corr) = valid_removal(&attempt, self.corr, &mut self.dag, self.cfg)?;
            if ok {
                self.corr = corr;
                for s in &fresh {
                    for l in &s.support {
                        if !self.locked.contains(l) {
                            self.locked.push(l.clone());
                        }
                    }
                }
                self.record(Action::Remove, lit, fresh);
                changed = true;
            }
        }
        Ok(changed)
    }

    /// Sources of `r` whose support lies in the original body: only those
    /// speak about the answers of the original query.
    fn completeness_sources(&self, r: &Residue) -> Vec<Source> {
        let original = self.dag.original_body();
        r.sources.iter().filter(|s| supported_by(s, &original)).cloned().collect()
    }

    fn restrictions(&mut self) -> Result<bool> {
        let pool = self.ready(Atom::is_builtin);
        let mut cands: Vec<(f64, Residue)> = Vec::new();
        for r in &pool {
            let head = r.head.as_ref().expect("ready residue");
            let mut sources: Vec<Source> = Vec::new();
            for other in &pool {
                if implies(head, other.head.as_ref().expect("ready residue")) {
                    let more = fresh_sources(&sources, &self.completeness_sources(other));
                    sources.extend(more);
                }
            }
            if sources.is_empty() {
                continue;
            }
            sources.sort_by(|a, b| a.id.cmp(&b.id));
            let value = phi_v(self.cfg.phi, &sources)?;
            cands.push((value, Residue { sources, ..r.clone() }));
        }
        cands.sort_by(|(a, r), (b, s)| b.total_cmp(a).then_with(|| r.to_string().cmp(&s.to_string())));

        let mut changed = false;
        for (_, r) in cands {
            let head = r.head.clone().expect("ready residue");
            let current = self.dag.rewritten_body();
            let indexed = head.vars().iter().all(|v| {
                current.iter().filter(|l| l.positive && !l.is_builtin()).any(|l| {
                    l.atom.args.iter().enumerate().any(|(p, t)| t.as_var() == Some(v) && self.cost.is_indexed(&l.atom.pred, p))
                })
            });
            if !indexed || verdict_in(&current, &head) != Verdict::Unknown {
                continue;
            }
            if !self.tried.insert(format!("restrict {head} {}", ids(&r.sources))) {
                continue;
            }
            let (ok, _, comp) = valid_insertion(&r, self.corr, self.comp, &mut self.dag, self.cfg)?;
            if ok {
                self.comp = comp;
                self.record(Action::InsertRestriction, Literal::pos(head), r.sources.clone());
                self.after_insertion();
                changed = true;
            }
        }
        Ok(changed)
    }

    fn insertions(&mut self) -> Result<bool> {
        let mut cands = self.ready(|h| {
            !h.is_builtin() && self.cost.is_extensional(&h.pred) && self.cost.size(&h.pred) <= self.small
        });
        cands.sort_by_cached_key(|r| {
            let h = r.head.as_ref().expect("ready residue");
            (self.cost.size(&h.pred), h.pred.clone(), r.label())
        });
        let mut changed = false;
        for r in cands {
            let usable = self.completeness_sources(&r);
            if usable.is_empty() {
                continue;
            }
            let current = self.dag.rewritten_body();
            let known = body_vars(&current);
            let head = r.head.clone().expect("ready residue");
            let local: Vec<Var> = head.vars().into_iter().filter(|v| !known.contains(v)).collect();
            let lit = Literal::pos(head.clone());
            // putting back an atom this rewrite removed would only cost bound
            if self.dag.position(&lit).is_some_and(|i| self.dag.nodes[i].is_removed()) {
                continue;
            }
            let reinforcing = local.is_empty() && self.dag.position(&lit).is_some_and(|i| self.dag.nodes[i].is_inserted());
            if reinforcing {
                let node = &self.dag.nodes[self.dag.position(&lit).expect("checked")];
                let fresh = fresh_sources(&node.sources, &usable);
                if fresh.is_empty() || !scaled(1.0, self.cfg.phi, &node.sources, &fresh)?.is_some_and(|g| g > 1.0 + EPS) {
                    continue;
                }
            } else if covered(&head, &local, &current) {
                continue;
            }
            let key = format!("insert {} {}", Residue { sources: usable.clone(), ..r.clone() }, ids(&usable));
            if !self.tried.insert(key) {
                continue;
            }
            let renaming: Substitution = local.iter().map(|v| (v.clone(), Term::Var(self.gen.fresh()))).collect();
            let attempt = Residue { head: Some(head.apply(&renaming)), sources: usable.clone(), ..r.clone() };
            let (ok, _, comp) = valid_insertion(&attempt, self.corr, self.comp, &mut self.dag, self.cfg)?;
            if ok {
                self.comp = comp;
                let lit = Literal::pos(attempt.head.clone().expect("ready residue"));
                self.record(Action::InsertAtom, lit, usable);
                self.after_insertion();
                changed = true;
            }
        }
        Ok(changed)
    }

    /// Match the residues still waiting against the grown query.
    fn after_insertion(&mut self) {
        let body = self.dag.rewritten_body();
        let mut next = Vec::with_capacity(self.pool.len());
        for r in std::mem::take(&mut self.pool) {
            if r.body.is_empty() {
                next.push(r);
            } else {
                next.extend(resubsume(&r, &body));
            }
        }
        self.pool = merge_residues(next);
    }
}

/// Rewrite `q` greedily with `residues` (as attached to `q`): removals
/// first, then restrictions, then atom insertions, repeated while any edit
/// is accepted. Each (edit, evidence) pair is attempted at most once.
pub fn greedy_transform(
    q: &Query,
    residues: &[Residue],
    cfg: &RewriteConfig,
    cost: &CostModel,
) -> Result<RewriteOutcome> {
    cfg.validate()?;
    let (large, small) = cfg.cutoffs(cost);
    let mut used = q.vars();
    for r in residues {
        used.extend(r.clause().vars());
        for s in &r.sources {
            used.extend(body_vars(&s.support));
        }
    }
    let mut g = Greedy {
        q,
        cfg,
        cost,
        large,
        small,
        dag: initialize_dag(q),
        corr: 1.0,
        comp: 1.0,
        pool: residues.to_vec(),
        locked: Vec::new(),
        tried: HashSet::new(),
        log: Vec::new(),
        gen: VarGen::avoiding(&used),
    };
    loop {
        let removed = g.removals()?;
        let restricted = g.restrictions()?;
        let inserted = g.insertions()?;
        if !(removed || restricted || inserted) {
            break;
        }
    }
    Ok(RewriteOutcome {
        original: q.clone(),
        rewritten: q.with_body(g.dag.rewritten_body()),
        corr: g.corr,
        comp: g.comp,
        log: g.log,
        dag: g.dag,
    })
}

/// Which constraints may derive a removed atom in the refinement program.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ConstraintScope {
    /// Only the constraints that justified the removal.
    #[default]
    Logged,
    /// Every constraint whose head has the removed atom's predicate.
    All,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RefineOptions {
    /// Keep removed atoms that are facts of the database as certain facts.
    pub check_removed_facts: bool,
    pub scope: ConstraintScope,
}

/// The ground program behind one answer of the rewritten query.
#[derive(Clone, Debug)]
pub struct RefinementProgram {
    pub blp: GroundBlp,
    pub goal: Atom,
}

impl RefinementProgram {
    pub fn belief(&self, phi: Combination) -> Result<f64> {
        belief_of(&self.blp, &self.goal, phi)
    }

    pub fn proof_dag(&self) -> Result<ProofDag> {
        build_proof_dag(&build_dependency_dag(&self.blp)?, &self.goal)
    }
}

/// Build the ground program that proves `answer` for the original query:
/// one certain rule per satisfying substitution of the rewritten query, the
/// facts the substitution uses, and the constraint instances that derive
/// each removed atom from the database.
pub fn refinement_program(
    answer: &[Const],
    outcome: &RewriteOutcome,
    store: &ExtensionStore,
    db: &Database,
    opts: RefineOptions,
) -> Result<RefinementProgram> {
    let q = &outcome.original;
    if answer.len() != q.output_vars.len() {
        return Err(Error::ArityMismatch(format!(
            "answer has {} values, {} expects {}",
            answer.len(),
            q.name,
            q.output_vars.len()
        )));
    }
    let goal = Atom::new(&q.name, answer.iter().cloned().map(Term::Const).collect());
    let bind: Substitution = q.output_vars.iter().cloned().zip(answer.iter().cloned().map(Term::Const)).collect();
    let body = outcome.rewritten.body.apply(&bind);
    let free = body_vars(&body);
    let removed: Vec<&BoundNode> = outcome.dag.removed().collect();

    let mut instances: BTreeSet<Vec<Literal>> = BTreeSet::new();
    let mut removed_ground: BTreeSet<(usize, Atom)> = BTreeSet::new();
    for_each_solution(&body, store, |b| {
        let sigma: Substitution =
            free.iter().filter_map(|v| b.get(v).map(|c| (v.clone(), Term::Const(c.clone())))).collect();
        let sigma = bind.compose(&sigma);
        let inst = q.body.apply(&sigma);
        if inst.iter().all(|l| l.atom.is_ground()) {
            for (k, n) in removed.iter().enumerate() {
                removed_ground.insert((k, n.literal.atom.apply(&sigma)));
            }
            instances.insert(inst);
        }
        Ok(())
    })?;
    if instances.is_empty() {
        return Err(Error::NotAnAnswer(goal.to_string()));
    }
    let excluded: BTreeSet<&Atom> =
        if opts.check_removed_facts { BTreeSet::new() } else { removed_ground.iter().map(|(_, a)| a).collect() };

    let mut blp = GroundBlp::new();
    let mut facts: BTreeSet<Atom> = BTreeSet::new();
    let mut add_facts = |lits: &[Literal], blp: &mut GroundBlp| {
        for l in lits.iter().filter(|l| !l.is_builtin()) {
            if excluded.contains(&l.atom) || facts.contains(&l.atom) {
                continue;
            }
            let args = l.atom.ground_args().unwrap_or_default();
            let holds = store.contains(&l.atom.pred, &args);
            let belief = match (l.positive, holds) {
                (true, true) => BeliefInterval::CERTAIN,
                (false, false) => BeliefInterval::FALSE,
                _ => continue,
            };
            facts.insert(l.atom.clone());
            blp.push(GroundClause::fact(format!("f{}", facts.len()), l.atom.clone(), belief));
        }
    };
    for (k, inst) in instances.iter().enumerate() {
        if let Some(c) = GroundClause::new(format!("rG{}", k + 1), goal.clone(), inst.clone(), BeliefInterval::CERTAIN)? {
            add_facts(inst, &mut blp);
            blp.push(c);
        }
    }

    let mut derived = 0usize;
    for (k, atom) in &removed_ground {
        let ids: Vec<&str> = match opts.scope {
            ConstraintScope::Logged => removed[*k].sources.iter().map(|s| s.id.as_str()).collect(),
            ConstraintScope::All => db
                .usable_constraints()
                .filter(|c| c.head().is_some_and(|h| h.pred == atom.pred))
                .map(|c| c.id.as_str())
                .collect(),
        };
        for id in ids {
            let Some(c) = db.constraint(id) else { continue };
            let Some(head) = c.head() else { continue };
            let mut s = Substitution::new();
            if !s.match_atom(head, atom) {
                continue;
            }
            let cbody = c.clause.body.apply(&s);
            let cvars = body_vars(&cbody);
            let mut bodies: BTreeSet<Vec<Literal>> = BTreeSet::new();
            for_each_solution(&cbody, store, |b| {
                let t: Substitution =
                    cvars.iter().filter_map(|v| b.get(v).map(|x| (v.clone(), Term::Const(x.clone())))).collect();
                bodies.insert(cbody.apply(&t));
                Ok(())
            })?;
            for inst in bodies {
                if inst.iter().any(|l| !l.atom.is_ground() || (!l.is_builtin() && excluded.contains(&l.atom))) {
                    continue;
                }
                derived += 1;
                if let Some(gc) = GroundClause::new(format!("{id}#{derived}"), atom.clone(), inst.clone(), c.belief)? {
                    add_facts(&inst, &mut blp);
                    blp.push(gc);
                }
            }
        }
    }
    Ok(RefinementProgram { blp, goal })
}

/// The belief that `answer` of the rewritten query answers the original
/// query, computed on its refinement program.
pub fn refine_answer_correctness(
    answer: &[Const],
    outcome: &RewriteOutcome,
    store: &ExtensionStore,
    db: &Database,
    phi: Combination,
    opts: RefineOptions,
) -> Result<f64> {
    refinement_program(answer, outcome, store, db, opts)?.belief(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CmpOp, SignedPred};

    fn v(n: &str) -> Term {
        Term::var(n)
    }

    fn pos(p: &str, args: Vec<Term>) -> Literal {
        Literal::pos(Atom::new(p, args))
    }

    fn ready(head: Atom, sources: &[(&str, f64)], support: Vec<Literal>) -> Residue {
        Residue {
            origin: SignedPred { pred: head.pred.clone(), positive: true },
            pattern: Literal::pos(head.clone()),
            head: Some(head),
            body: Vec::new(),
            sources: sources
                .iter()
                .map(|(id, b)| Source { id: id.to_string(), belief: BeliefInterval::point(*b), support: support.clone() })
                .collect(),
            via_rule: None,
            context: Vec::new(),
        }
    }

    fn q2ish() -> Query {
        Query::all_vars("q", vec![pos("a", vec![v("X"), v("Y")]), pos("b", vec![v("Y")]), pos("c", vec![v("X")])])
    }

    #[test]
    fn initial_dag_shape() {
        let dag = initialize_dag(&q2ish());
        assert_eq!(dag.node_count(), 7);
        assert_eq!(dag.edge_count(), 8);
        assert!(dag.to_dot().contains("a2 -> rgp"));
    }

    #[test]
    fn removal_bound_and_threshold() {
        let q = q2ish();
        let r = ready(Atom::new("b", vec![v("Y")]), &[("IC2", 0.9), ("IC3", 0.7)], vec![q.body[0].clone()]);
        let mut dag = initialize_dag(&q);
        let strict = RewriteConfig { t_corr: 0.96, ..RewriteConfig::default() };
        assert_eq!(valid_removal(&r, 1.0, &mut dag, &strict).unwrap(), (false, 1.0));
        assert_eq!(dag, initialize_dag(&q));

        let (ok, corr) = valid_removal(&r, 1.0, &mut dag, &RewriteConfig::default()).unwrap();
        assert!(ok);
        assert!((corr - 21.0 / 22.0).abs() < 1e-12);
        assert_eq!(dag.edge_count(), 7);
        assert_eq!(dag.removed().count(), 1);

        let max = RewriteConfig { phi: Combination::Max, ..RewriteConfig::default() };
        let single = ready(Atom::new("c", vec![v("X")]), &[("IC9", 0.9)], Vec::new());
        let (ok, corr) = valid_removal(&single, 1.0, &mut initialize_dag(&q), &max).unwrap();
        assert!(ok);
        assert!((corr - 0.9).abs() < 1e-12);
    }

    #[test]
    fn re_removal_uses_the_ratio() {
        let q = q2ish();
        let mut dag = initialize_dag(&q);
        let cfg = RewriteConfig { t_corr: 0.5, ..RewriteConfig::default() };
        let first = ready(Atom::new("b", vec![v("Y")]), &[("A", 0.8)], Vec::new());
        let (_, corr) = valid_removal(&first, 1.0, &mut dag, &cfg).unwrap();
        let second = ready(Atom::new("b", vec![v("Y")]), &[("A", 0.8), ("B", 0.8)], Vec::new());
        let (ok, corr) = valid_removal(&second, corr, &mut dag, &cfg).unwrap();
        assert!(ok);
        assert!((corr - 16.0 / 17.0).abs() < 1e-12);
    }

    #[test]
    fn insertion_bounds() {
        let q = q2ish();
        let mut dag = initialize_dag(&q);
        let r = ready(Atom::new("d", vec![v("X")]), &[("IC1", 0.8)], vec![q.body[2].clone()]);
        let (ok, corr, comp) = valid_insertion(&r, 1.0, 1.0, &mut dag, &RewriteConfig::default()).unwrap();
        assert!(ok);
        assert_eq!(corr, 1.0);
        assert!((comp - 0.8).abs() < 1e-12);
        assert_eq!(dag.edge_count(), 9);
        assert_eq!(dag.inserted().count(), 1);

        let strict = RewriteConfig { t_comp: 0.99, ..RewriteConfig::default() };
        let mut dag = initialize_dag(&q);
        assert_eq!(valid_insertion(&r, 1.0, 1.0, &mut dag, &strict).unwrap(), (false, 1.0, 1.0));

        let restriction = Atom::cmp(CmpOp::Ge, v("Y"), Term::int(30));
        let r = ready(restriction, &[("IC4", 0.8), ("IC5", 0.9)], Vec::new());
        let (ok, _, comp) = valid_insertion(&r, 1.0, 1.0, &mut initialize_dag(&q), &RewriteConfig::default()).unwrap();
        assert!(ok);
        assert!((comp - 0.72 / 0.74).abs() < 1e-12);
    }

    #[test]
    fn residue_with_body_is_an_error() {
        let mut r = ready(Atom::new("b", vec![v("Y")]), &[("A", 0.9)], Vec::new());
        r.body.push(pos("e", vec![v("Y")]));
        let mut dag = initialize_dag(&q2ish());
        assert!(matches!(
            valid_removal(&r, 1.0, &mut dag, &RewriteConfig::default()),
            Err(Error::ResidueBodyNonEmpty(_))
        ));
    }

    #[test]
    fn percentile_cutoffs() {
        assert_eq!(percentile(&[1, 2, 3, 4], 75), 3);
        assert_eq!(percentile(&[1, 2, 3, 4], 25), 1);
        assert_eq!(percentile(&[], 75), 0);
        assert_eq!(percentile(&[7], 25), 7);
    }

    #[test]
    fn restriction_implication() {
        let ge = |n| Atom::cmp(CmpOp::Ge, v("Y"), Term::int(n));
        assert!(implies(&ge(30), &ge(20)));
        assert!(!implies(&ge(20), &ge(30)));
        assert!(covered(&Atom::new("a", vec![v("X"), v("L")]), &[Var::new("L")], &q2ish().body));
        assert!(!covered(&Atom::new("a", vec![v("Y"), v("L")]), &[Var::new("L")], &q2ish().body));
    }
}
