//! Dependency and proof DAGs, and the incremental fixpoint evaluator.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{Atom, BeliefInterval};

use super::combine::Combination;
use super::formula::Truth;
use super::ground::{body_truth, val, GroundBlp, GroundClause};

/// A rule node: one ground clause with an edge to its head a-node.
#[derive(Clone, Debug, PartialEq)]
pub struct RNode {
    pub id: String,
    pub head: usize,
    /// Body a-nodes with their sign.
    pub body: Vec<(usize, bool)>,
    pub belief: BeliefInterval,
}

/// Bipartite graph of atom nodes and rule nodes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DependencyDag {
    pub atoms: Vec<Atom>,
    pub rules: Vec<RNode>,
}

impl DependencyDag {
    pub fn a_node_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn r_node_count(&self) -> usize {
        self.rules.len()
    }

    /// Edges a-node to r-node plus one edge from every r-node to its head.
    pub fn edge_count(&self) -> usize {
        self.rules.iter().map(|r| distinct_atoms(&r.body).len() + 1).sum()
    }

    pub fn atom_id(&self, a: &Atom) -> Option<usize> {
        self.atoms.iter().position(|x| x == a)
    }

    pub fn rules_for(&self, head: usize) -> impl Iterator<Item = &RNode> {
        self.rules.iter().filter(move |r| r.head == head)
    }

    /// The ground program the graph was built from.
    pub fn to_blp(&self) -> GroundBlp {
        self.rules
            .iter()
            .map(|r| GroundClause {
                id: r.id.clone(),
                head: self.atoms[r.head].clone(),
                body: r
                    .body
                    .iter()
                    .map(|&(a, s)| crate::model::Literal { positive: s, atom: self.atoms[a].clone() })
                    .collect(),
                belief: r.belief,
            })
            .collect()
    }

    /// DOT rendering: ellipses for atoms, boxes for rules, belief factors on
    /// rule-to-head edges, and negated body edges dashed.
    pub fn to_dot(&self, name: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "digraph \"{}\" {{", escape(name));
        let _ = writeln!(s, "  rankdir=BT;");
        for (i, a) in self.atoms.iter().enumerate() {
            let _ = writeln!(s, "  a{i} [shape=ellipse, label=\"{}\"];", escape(&a.to_string()));
        }
        for (j, r) in self.rules.iter().enumerate() {
            let _ = writeln!(s, "  r{j} [shape=box, label=\"{}\"];", escape(&r.id));
            for &(a, positive) in &r.body {
                let style = if positive { "" } else { " [style=dashed]" };
                let _ = writeln!(s, "  a{a} -> r{j}{style};");
            }
            let _ = writeln!(s, "  r{j} -> a{} [label=\"{}\"];", r.head, r.belief);
        }
        s.push_str("}\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn distinct_atoms(body: &[(usize, bool)]) -> Vec<usize> {
    let mut out: Vec<usize> = body.iter().map(|&(a, _)| a).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Build the dependency DAG of a ground program. Atoms are numbered in
/// sorted order so that every later traversal is deterministic.
pub fn build_dependency_dag(blp: &GroundBlp) -> Result<DependencyDag> {
    let atoms = blp.atoms();
    let index: HashMap<&Atom, usize> = atoms.iter().enumerate().map(|(i, a)| (a, i)).collect();
    let rules = blp
        .clauses
        .iter()
        .map(|c| RNode {
            id: c.id.clone(),
            head: index[&c.head],
            body: c.body.iter().map(|l| (index[&l.atom], l.positive)).collect(),
            belief: c.belief,
        })
        .collect();
    let dag = DependencyDag { atoms, rules };
    topological_order(&dag, &vec![true; dag.atoms.len()])?;
    Ok(dag)
}

/// Atoms in a stable topological order: an atom follows every atom in the
/// bodies of its rules, ties broken by the smaller node id.
fn topological_order(dag: &DependencyDag, keep: &[bool]) -> Result<Vec<usize>> {
    let n = dag.atoms.len();
    let mut pending = vec![0usize; n];
    let mut users: Vec<Vec<usize>> = vec![Vec::new(); n];
    for r in &dag.rules {
        for a in distinct_atoms(&r.body) {
            if !users[a].contains(&r.head) {
                users[a].push(r.head);
                pending[r.head] += 1;
            }
        }
    }
    let mut heap: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| keep[i] && pending[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(a)) = heap.pop() {
        order.push(a);
        for &h in &users[a] {
            pending[h] -= 1;
            if pending[h] == 0 {
                heap.push(Reverse(h));
            }
        }
    }
    let expected = keep.iter().filter(|&&k| k).count();
    if order.len() < expected {
        let stuck = (0..n).find(|&i| keep[i] && pending[i] > 0).map(|i| dag.atoms[i].to_string()).unwrap_or_default();
        return Err(Error::Cycle(stuck));
    }
    Ok(order)
}

/// A pruned proof DAG for one goal atom.
#[derive(Clone, Debug, PartialEq)]
pub struct ProofDag {
    pub dag: DependencyDag,
    pub goal: usize,
}

impl ProofDag {
    pub fn goal_atom(&self) -> &Atom {
        &self.dag.atoms[self.goal]
    }

    pub fn to_dot(&self) -> String {
        self.dag.to_dot(&self.goal_atom().to_string())
    }
}

/// Restrict `dag` to the nodes with a path to `goal`, then drop rules that
/// can never fire and atoms no rule supports, until nothing changes.
pub fn build_proof_dag(dag: &DependencyDag, goal: &Atom) -> Result<ProofDag> {
    let g = dag.atom_id(goal).ok_or_else(|| Error::GoalAbsent(goal.to_string()))?;
    let n = dag.atoms.len();
    let mut rule_alive = vec![true; dag.rules.len()];
    loop {
        // ancestry of the goal among live rules
        let mut reach = vec![false; n];
        reach[g] = true;
        let mut stack = vec![g];
        let mut rule_reach = vec![false; dag.rules.len()];
        while let Some(a) = stack.pop() {
            for (j, r) in dag.rules.iter().enumerate() {
                if rule_alive[j] && r.head == a && !rule_reach[j] {
                    rule_reach[j] = true;
                    for &(b, _) in &r.body {
                        if !reach[b] {
                            reach[b] = true;
                            stack.push(b);
                        }
                    }
                }
            }
        }
        let supported: Vec<bool> = (0..n).map(|a| dag.rules.iter().enumerate().any(|(j, r)| rule_reach[j] && r.head == a)).collect();
        let mut changed = false;
        for (j, r) in dag.rules.iter().enumerate() {
            if !rule_reach[j] {
                if rule_alive[j] {
                    rule_alive[j] = false;
                    changed = true;
                }
                continue;
            }
            if r.body.iter().any(|&(b, _)| !supported[b]) {
                rule_alive[j] = false;
                changed = true;
            }
        }
        if !changed {
            return Ok(restrict(dag, &reach, &rule_alive, g));
        }
    }
}

fn restrict(dag: &DependencyDag, keep_atom: &[bool], keep_rule: &[bool], goal: usize) -> ProofDag {
    let mut remap = vec![usize::MAX; dag.atoms.len()];
    let mut atoms = Vec::new();
    for (i, a) in dag.atoms.iter().enumerate() {
        if keep_atom[i] && (i == goal || dag.rules.iter().enumerate().any(|(j, r)| keep_rule[j] && (r.head == i || r.body.iter().any(|&(b, _)| b == i)))) {
            remap[i] = atoms.len();
            atoms.push(a.clone());
        }
    }
    let rules = dag
        .rules
        .iter()
        .enumerate()
        .filter(|(j, _)| keep_rule[*j])
        .map(|(_, r)| RNode {
            id: r.id.clone(),
            head: remap[r.head],
            body: r.body.iter().map(|&(b, s)| (remap[b], s)).collect(),
            belief: r.belief,
        })
        .collect();
    ProofDag { dag: DependencyDag { atoms, rules }, goal: remap[goal] }
}

/// The belief in the goal, computed by extending a support function one atom
/// at a time in post-order and projecting out atoms nothing else needs.
pub fn ground_belief(pd: &ProofDag, phi: Combination) -> Result<f64> {
    let dag = &pd.dag;
    let n = dag.atoms.len();
    let order = topological_order(dag, &vec![true; n])?;

    // remaining parents: distinct heads of rules using the atom
    let mut remaining = vec![0usize; n];
    let mut seen_pairs = std::collections::HashSet::new();
    for r in &dag.rules {
        for a in distinct_atoms(&r.body) {
            if seen_pairs.insert((a, r.head)) {
                remaining[a] += 1;
            }
        }
    }

    let mut base: Vec<usize> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    let mut entries: Vec<(Vec<Truth>, f64)> = vec![(Vec::new(), 1.0)];
    let mut firing = Vec::new();

    for &x in &order {
        let rules: Vec<&RNode> = dag.rules_for(x).collect();
        let mut next = Vec::with_capacity(entries.len() * 2);
        for (key, m) in &entries {
            firing.clear();
            for r in &rules {
                if body_truth(r.body.iter().map(|&(a, s)| (key[slot[a]], s))) == Truth::T {
                    firing.push(r.belief);
                }
            }
            let b = phi.combine(&firing)?;
            for tau in Truth::ALL {
                let p = m * val(b, tau);
                if p > 0.0 {
                    let mut k = key.clone();
                    k.push(tau);
                    next.push((k, p));
                }
            }
        }
        slot[x] = base.len();
        base.push(x);
        entries = next;

        // project out atoms whose every user is now in the base
        let mut done: Vec<usize> = Vec::new();
        for r in &rules {
            for a in distinct_atoms(&r.body) {
                if !done.contains(&a) {
                    done.push(a);
                }
            }
        }
        for a in done {
            remaining[a] -= 1;
            if remaining[a] == 0 && a != pd.goal {
                entries = project_out(&entries, slot[a]);
                base.remove(slot[a]);
                slot[a] = usize::MAX;
                for (i, &b) in base.iter().enumerate() {
                    slot[b] = i;
                }
            }
        }
    }
    let g = slot[pd.goal];
    Ok(entries.iter().filter(|(k, _)| k[g] == Truth::T).map(|(_, m)| m).sum())
}

fn project_out(entries: &[(Vec<Truth>, f64)], pos: usize) -> Vec<(Vec<Truth>, f64)> {
    let mut merged: HashMap<Vec<Truth>, f64> = HashMap::with_capacity(entries.len());
    let mut order = Vec::new();
    for (k, m) in entries {
        let mut k2 = k.clone();
        k2.remove(pos);
        match merged.get_mut(&k2) {
            Some(acc) => *acc += m,
            None => {
                order.push(k2.clone());
                merged.insert(k2, *m);
            }
        }
    }
    order.into_iter().map(|k| {
        let m = merged[&k];
        (k, m)
    }).collect()
}

/// Build the proof DAG of `goal` in `blp` and evaluate it.
pub fn belief_of(blp: &GroundBlp, goal: &Atom, phi: Combination) -> Result<f64> {
    let dag = build_dependency_dag(blp)?;
    match dag.atom_id(goal) {
        None => Ok(0.0),
        Some(_) => ground_belief(&build_proof_dag(&dag, goal)?, phi),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blp::formula::Formula;
    use crate::blp::ground::brute_force_model;
    use crate::model::Literal;
    use proptest::prelude::*;

    fn a(p: &str) -> Atom {
        Atom::new(p, vec![])
    }

    fn chain() -> GroundBlp {
        let mut blp = GroundBlp::new();
        blp.push(GroundClause::fact("fa", a("a"), BeliefInterval::CERTAIN));
        blp.push(GroundClause::new("rb", a("b"), vec![Literal::pos(a("a"))], BeliefInterval::point(0.8)).unwrap().unwrap());
        blp
    }

    #[test]
    fn dependency_dag_transcription() {
        let dag = build_dependency_dag(&chain()).unwrap();
        assert_eq!(dag.a_node_count(), 2);
        assert_eq!(dag.r_node_count(), 2);
        assert_eq!(dag.edge_count(), 3);
        let empty = build_dependency_dag(&GroundBlp::new()).unwrap();
        assert_eq!(empty.a_node_count() + empty.r_node_count(), 0);
    }

    #[test]
    fn cycles_are_rejected() {
        let mut blp = GroundBlp::new();
        blp.push(GroundClause::new("r1", a("p"), vec![Literal::pos(a("q"))], BeliefInterval::CERTAIN).unwrap().unwrap());
        blp.push(GroundClause::new("r2", a("q"), vec![Literal::pos(a("p"))], BeliefInterval::CERTAIN).unwrap().unwrap());
        assert!(matches!(build_dependency_dag(&blp), Err(Error::Cycle(_))));
    }

    #[test]
    fn proof_dag_excludes_unrelated_nodes() {
        let mut blp = chain();
        blp.push(GroundClause::new("rc", a("c"), vec![Literal::pos(a("b"))], BeliefInterval::point(0.5)).unwrap().unwrap());
        let dag = build_dependency_dag(&blp).unwrap();
        let pd = build_proof_dag(&dag, &a("b")).unwrap();
        assert!(pd.dag.rules.iter().all(|r| r.id != "rc"));
        assert_eq!(pd.dag.a_node_count(), 2);
        assert!(matches!(build_proof_dag(&dag, &a("zzz")), Err(Error::GoalAbsent(_))));
    }

    #[test]
    fn unsupported_goal_has_zero_belief() {
        let mut blp = GroundBlp::new();
        blp.push(GroundClause::new("r", a("g"), vec![Literal::pos(a("missing"))], BeliefInterval::CERTAIN).unwrap().unwrap());
        let dag = build_dependency_dag(&blp).unwrap();
        let pd = build_proof_dag(&dag, &a("g")).unwrap();
        assert_eq!(pd.dag.a_node_count(), 1);
        assert_eq!(pd.dag.r_node_count(), 0);
        assert_eq!(ground_belief(&pd, Combination::Dempster).unwrap(), 0.0);
    }

    #[test]
    fn incremental_matches_goldens() {
        assert!((belief_of(&chain(), &a("b"), Combination::Dempster).unwrap() - 0.8).abs() < 1e-12);
        let mut blp = GroundBlp::new();
        blp.push(GroundClause::fact("f1", a("e1"), BeliefInterval::CERTAIN));
        blp.push(GroundClause::fact("f2", a("e2"), BeliefInterval::CERTAIN));
        blp.push(GroundClause::new("r1", a("b"), vec![Literal::pos(a("e1"))], BeliefInterval::point(0.9)).unwrap().unwrap());
        blp.push(GroundClause::new("r2", a("b"), vec![Literal::pos(a("e2"))], BeliefInterval::point(0.7)).unwrap().unwrap());
        let got = belief_of(&blp, &a("b"), Combination::Dempster).unwrap();
        assert!((got - 21.0 / 22.0).abs() < 1e-12);
    }

    #[test]
    fn dot_has_shapes_and_labels() {
        let dag = build_dependency_dag(&chain()).unwrap();
        let dot = dag.to_dot("chain");
        assert!(dot.contains("shape=ellipse") && dot.contains("shape=box") && dot.contains("[0.8, 0.8]"));
    }

    /// Random hierarchical ground programs: clause heads are drawn from atoms
    /// with a larger index than any body atom, which rules out cycles.
    fn program() -> impl Strategy<Value = GroundBlp> {
        let clause = (1usize..6, prop::collection::vec((0usize..6, any::<bool>()), 0..3), 0u32..=20, 0u32..=20);
        prop::collection::vec(clause, 1..8).prop_map(|cs| {
            cs.into_iter()
                .enumerate()
                .filter_map(|(i, (h, body, x, y))| {
                    let (v, w) = if x <= y { (x, y) } else { (y, x) };
                    let body: Vec<Literal> = body
                        .into_iter()
                        .filter(|(b, _)| *b < h)
                        .map(|(b, s)| Literal { positive: s, atom: a(&format!("p{b}")) })
                        .collect();
                    GroundClause::new(
                        format!("c{i}"),
                        a(&format!("p{h}")),
                        body,
                        BeliefInterval::new(v as f64 / 20.0, w as f64 / 20.0).unwrap(),
                    )
                    .unwrap()
                })
                .collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn incremental_equals_enumeration(blp in program()) {
            let dag = build_dependency_dag(&blp).unwrap();
            for goal in dag.atoms.clone() {
                let pd = build_proof_dag(&dag, &goal).unwrap();
                for phi in Combination::ALL {
                    let fast = ground_belief(&pd, phi);
                    let slow = brute_force_model(&blp, &Formula::atom(goal.clone()), phi);
                    match (fast, slow) {
                        (Ok(x), Ok(y)) => prop_assert!((x - y).abs() < 1e-9, "{goal} {phi}: {x} vs {y}"),
                        (Err(_), Err(_)) => {}
                        (x, y) => prop_assert!(false, "{x:?} vs {y:?}"),
                    }
                }
            }
        }
    }
}
