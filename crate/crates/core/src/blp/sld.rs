//! Non-ground query answering: an SLD tree over the annotated program, from
//! which one pruned proof DAG per ground answer is extracted and evaluated.

use std::collections::{BTreeMap, BTreeSet};

use crate::builtin::eval_builtin;
use crate::error::{Error, Result};
use crate::model::{Atom, BeliefInterval, Clause, Const, Database, Literal, Query, Term, VarGen};
use crate::unify::{rename_apart, unify, Apply, Substitution};

use super::combine::Combination;
use super::dag::{build_dependency_dag, build_proof_dag, ground_belief, ProofDag};
use super::ground::{GroundBlp, GroundClause};

/// Default bound on the number of SLD nodes explored for one query.
pub const SLD_NODE_CAP: usize = 200_000;

/// Identifier used for the implicit `[0,0]` facts of the closed-world mode.
pub const CLOSED_WORLD_ID: &str = "cwa";

/// An annotated, possibly non-ground clause with a head atom.
#[derive(Clone, Debug, PartialEq)]
pub struct BlpClause {
    pub id: String,
    pub head: Atom,
    pub body: Vec<Literal>,
    pub belief: BeliefInterval,
}

/// A non-ground belief logic program.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Blp {
    pub clauses: Vec<BlpClause>,
    /// When set, a ground negated atom that no clause head unifies with is
    /// resolved against an implicit `[0,0]` fact.
    pub closed_world: bool,
}

impl Blp {
    pub fn new(clauses: Vec<BlpClause>) -> Self {
        Blp { clauses, closed_world: false }
    }

    pub fn with_closed_world(mut self, on: bool) -> Self {
        self.closed_world = on;
        self
    }

    /// Facts and rules of `db`, plus its constraints with a database head
    /// when `include_constraints` is set. Denials and built-in heads carry
    /// no derivation and are left out.
    pub fn from_database(db: &Database, include_constraints: bool) -> Blp {
        let ic: &[_] = if include_constraints { &db.ic } else { &[] };
        let clauses = db
            .edb
            .iter()
            .chain(&db.idb)
            .chain(ic)
            .filter_map(|c| {
                let head = c.head()?;
                (!head.is_builtin()).then(|| BlpClause {
                    id: c.id.clone(),
                    head: head.clone(),
                    body: c.clause.body.clone(),
                    belief: c.belief,
                })
            })
            .collect();
        Blp::new(clauses)
    }

    fn clause_vars(c: &BlpClause) -> Vec<crate::model::Var> {
        Clause::new(Some(c.head.clone()), c.body.clone()).vars()
    }
}

/// Label of an edge of the SLD tree.
#[derive(Clone, Debug, PartialEq)]
pub struct SldEdge {
    /// The most general unifier of the step.
    pub theta: Substitution,
    /// The clause used, or `None` for the evaluation of a built-in.
    pub rule_id: Option<String>,
    /// The query variables under the cumulative substitution.
    pub vars: Substitution,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SldNode {
    pub goal: Vec<Literal>,
    pub parent: Option<usize>,
    pub edge: Option<SldEdge>,
    pub success: bool,
    subst: Substitution,
    instance: Option<BlpClause>,
}

/// An SLD tree in which every node lies on a path to a success leaf.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SldTree {
    pub nodes: Vec<SldNode>,
}

impl SldTree {
    pub fn build(blp: &Blp, q: &Query) -> Result<SldTree> {
        SldTree::build_capped(blp, q, SLD_NODE_CAP)
    }

    pub fn build_capped(blp: &Blp, q: &Query, cap: usize) -> Result<SldTree> {
        let qvars = q.vars();
        let mut gen = VarGen::new();
        let mut nodes = vec![SldNode {
            goal: q.body.clone(),
            parent: None,
            edge: None,
            success: q.body.is_empty(),
            subst: Substitution::new(),
            instance: None,
        }];
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            if nodes[n].success {
                continue;
            }
            let children = expand(blp, &nodes[n], &mut gen)?;
            for (goal, theta, instance) in children {
                let subst = nodes[n].subst.compose(&theta);
                let vars = qvars.iter().map(|v| (v.clone(), Term::Var(v.clone()).apply(&subst))).collect();
                let rule_id = instance.as_ref().map(|c| c.id.clone());
                nodes.push(SldNode {
                    success: goal.is_empty(),
                    goal,
                    parent: Some(n),
                    edge: Some(SldEdge { theta, rule_id, vars }),
                    subst,
                    instance,
                });
                if nodes.len() > cap {
                    return Err(Error::CapExceeded { what: "SLD tree", size: nodes.len(), cap });
                }
                stack.push(nodes.len() - 1);
            }
        }
        Ok(SldTree { nodes: prune_dead(nodes) })
    }

    pub fn success_leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].success)
    }

    /// Ground clause instances used on the path from the root to `leaf`.
    fn path_instances(&self, leaf: usize) -> Vec<BlpClause> {
        let subst = &self.nodes[leaf].subst;
        let mut out = Vec::new();
        let mut cur = Some(leaf);
        while let Some(i) = cur {
            if let Some(c) = &self.nodes[i].instance {
                out.push(BlpClause { id: c.id.clone(), head: c.head.apply(subst), body: c.body.apply(subst), belief: c.belief });
            }
            cur = self.nodes[i].parent;
        }
        out
    }
}

type Child = (Vec<Literal>, Substitution, Option<BlpClause>);

fn expand(blp: &Blp, node: &SldNode, gen: &mut VarGen) -> Result<Vec<Child>> {
    let goal = &node.goal;
    // ground built-ins first, they only filter
    if let Some(i) = goal.iter().position(|l| l.is_builtin() && l.atom.is_ground()) {
        let holds = eval_builtin(&goal[i].atom)? == goal[i].positive;
        let mut rest = goal.clone();
        rest.remove(i);
        return Ok(if holds { vec![(rest, Substitution::new(), None)] } else { Vec::new() });
    }
    let Some(i) = goal.iter().position(|l| !l.is_builtin() && (l.positive || l.atom.is_ground())) else {
        let stuck = goal.iter().find(|l| !l.atom.is_ground()).unwrap_or(&goal[0]);
        return Err(Error::NonGroundBuiltin(stuck.to_string()));
    };
    let selected = &goal[i].atom;
    let mut rest = goal.clone();
    rest.remove(i);
    let mut out = Vec::new();
    for c in blp.clauses.iter().filter(|c| c.head.pred == selected.pred && c.head.arity() == selected.arity()) {
        let (renamed, _) = rename_apart(&(c.head.clone(), c.body.clone()), &Blp::clause_vars(c), gen);
        let Some(theta) = unify(selected, &renamed.0) else { continue };
        let mut next = renamed.1.clone();
        next.extend(rest.iter().cloned());
        let instance = BlpClause { id: c.id.clone(), head: renamed.0, body: renamed.1, belief: c.belief };
        out.push((next.apply(&theta), theta, Some(instance)));
    }
    if out.is_empty() && !goal[i].positive && blp.closed_world {
        let fact = BlpClause { id: CLOSED_WORLD_ID.into(), head: selected.clone(), body: Vec::new(), belief: BeliefInterval::FALSE };
        out.push((rest, Substitution::new(), Some(fact)));
    }
    Ok(out)
}

/// Keep only nodes with a success leaf below them, renumbering parents.
fn prune_dead(nodes: Vec<SldNode>) -> Vec<SldNode> {
    let mut alive: Vec<bool> = nodes.iter().map(|n| n.success).collect();
    // children always have a larger index than their parent
    for i in (0..nodes.len()).rev() {
        if alive[i] {
            if let Some(p) = nodes[i].parent {
                alive[p] = true;
            }
        }
    }
    let mut remap = vec![usize::MAX; nodes.len()];
    let mut out = Vec::new();
    for (i, mut n) in nodes.into_iter().enumerate() {
        if alive[i] {
            n.parent = n.parent.map(|p| remap[p]);
            remap[i] = out.len();
            out.push(n);
        }
    }
    out
}

/// One ground answer with its belief and the proof DAG it was computed on.
#[derive(Clone, Debug, PartialEq)]
pub struct SldAnswer {
    pub tuple: Vec<Const>,
    pub belief: f64,
    pub proof: ProofDag,
}

fn instance_id(id: &str, head: &Atom, body: &[Literal]) -> String {
    let mut args: Vec<String> = Vec::new();
    for t in head.args.iter().chain(body.iter().flat_map(|l| l.atom.args.iter())) {
        let s = t.to_string();
        if !args.contains(&s) {
            args.push(s);
        }
    }
    if args.is_empty() {
        id.to_string()
    } else {
        format!("{id}({})", args.join(", "))
    }
}

/// Answer `q` over `blp`: every distinct ground answer whose belief is
/// positive, in tuple order.
pub fn sld_answers(blp: &Blp, q: &Query, phi: Combination) -> Result<Vec<SldAnswer>> {
    let tree = SldTree::build(blp, q)?;
    let goal_clause = q.as_clause();
    let mut per_answer: BTreeMap<Vec<Const>, (BTreeSet<String>, GroundBlp)> = BTreeMap::new();
    for leaf in tree.success_leaves() {
        let subst = &tree.nodes[leaf].subst;
        let head = goal_clause.head.as_ref().expect("query clause has a head").apply(subst);
        let tuple = head.ground_args().ok_or_else(|| Error::NonGroundBuiltin(format!("answer {head} is not ground")))?;
        let (seen, blp_out) = per_answer.entry(tuple).or_default();
        let mut add = |id: &str, head: Atom, body: Vec<Literal>, belief: BeliefInterval| -> Result<()> {
            let name = instance_id(id, &head, &body);
            let key = format!("{name}|{head}|{body:?}");
            if seen.insert(key) {
                if let Some(gc) = GroundClause::new(name, head, body, belief)? {
                    blp_out.push(gc);
                }
            }
            Ok(())
        };
        add("rG", head.clone(), goal_clause.body.apply(subst), BeliefInterval::CERTAIN)?;
        for c in tree.path_instances(leaf) {
            add(&c.id, c.head, c.body, c.belief)?;
        }
    }
    let mut out = Vec::new();
    for (tuple, (_, ground)) in per_answer {
        let goal = Atom::new(&q.name, tuple.iter().cloned().map(Term::Const).collect());
        let proof = build_proof_dag(&build_dependency_dag(&ground)?, &goal)?;
        let belief = ground_belief(&proof, phi)?;
        if belief > 0.0 {
            out.push(SldAnswer { tuple, belief, proof });
        }
    }
    Ok(out)
}
