//! Helpers shared by the integration tests: fixture loading, reference
//! implementations used as oracles, and the rewriting shape checks.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use approxsqo::builtin::eval_builtin;
use approxsqo::eval::{evaluate, extension_stats, AnswerSet, ExtensionStore};
use approxsqo::miner::MinedRule;
use approxsqo::session::Session;
use approxsqo::synth::ShapeCase;
use approxsqo::text::{load_file, Document};
use approxsqo::transform::{greedy_transform, Action};
use approxsqo::{Atom, Const, Database, Literal, Query, Term, Var};

pub const TOL: f64 = 1e-9;

pub fn fixture() -> Document {
    load_file(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/bibliography.dl")).expect("fixture loads")
}

/// The fixture constraints the residue and bound goldens use.
pub const EXAMPLE_CONSTRAINTS: [&str; 5] = ["IC1", "IC2", "IC3", "IC4", "IC5"];

/// A session over the fixture restricted to IC1..IC5, where `bestseller`
/// counts as a large relation and `authoritative` as a small one.
pub fn example_session() -> (Document, Session) {
    let doc = fixture();
    let mut s = Session::new(doc.db.with_constraints(&EXAMPLE_CONSTRAINTS)).expect("fixture is valid");
    s.cost.set_size("bestseller", 1000);
    (doc, s)
}

pub fn example_config() -> approxsqo::transform::RewriteConfig {
    approxsqo::transform::RewriteConfig { large_cutoff: Some(100), small_cutoff: Some(2), ..Default::default() }
}

fn bind(t: &Term, s: &BTreeMap<Var, Const>) -> Option<Const> {
    match t {
        Term::Const(c) => Some(c.clone()),
        Term::Var(v) => s.get(v).cloned(),
    }
}

/// Answers of `q` by nested loops over the raw fact list, checking negated
/// and built-in literals once every database literal is matched.
pub fn naive_answers(q: &Query, db: &Database) -> BTreeSet<Vec<Const>> {
    let facts: Vec<(String, Vec<Const>)> = db
        .edb
        .iter()
        .map(|f| {
            let h = f.head().expect("facts have heads");
            (h.pred.to_string(), h.ground_args().expect("facts are ground"))
        })
        .collect();
    let positive: Vec<&Atom> = q.body.iter().filter(|l| l.positive && !l.is_builtin()).map(|l| &l.atom).collect();
    let checks: Vec<&Literal> = q.body.iter().filter(|l| !l.positive || l.is_builtin()).collect();
    let mut out = BTreeSet::new();
    let mut stack = vec![(0usize, BTreeMap::new())];
    while let Some((i, s)) = stack.pop() {
        if i == positive.len() {
            let ok = checks.iter().all(|l| {
                let args: Vec<Term> =
                    l.atom.args.iter().map(|t| Term::Const(bind(t, &s).expect("safe query"))).collect();
                let a = Atom::new(&l.atom.pred, args);
                let holds = if l.is_builtin() {
                    eval_builtin(&a).unwrap_or(false)
                } else {
                    let g = a.ground_args().expect("ground");
                    facts.iter().any(|(p, row)| *p == *a.pred && *row == g)
                };
                holds == l.positive
            });
            if ok {
                out.insert(q.output_vars.iter().map(|v| s[v].clone()).collect());
            }
            continue;
        }
        let a = positive[i];
        'facts: for (p, row) in &facts {
            if *p != *a.pred || row.len() != a.args.len() {
                continue;
            }
            let mut s2 = s.clone();
            for (t, c) in a.args.iter().zip(row) {
                match t {
                    Term::Const(k) if k != c => continue 'facts,
                    Term::Const(_) => {}
                    Term::Var(v) => match s2.get(v) {
                        Some(b) if b != c => continue 'facts,
                        Some(_) => {}
                        None => {
                            s2.insert(v.clone(), c.clone());
                        }
                    },
                }
            }
            stack.push((i + 1, s2));
        }
    }
    out
}

/// Check the shape properties of one rewriting. Returns a description of
/// the first violated property.
pub fn check_shape(case: &ShapeCase, certain: bool) -> Result<(), String> {
    let store = ExtensionStore::from_database(&case.db).map_err(|e| e.to_string())?;
    let cost = extension_stats(&case.db, &store);
    let table = approxsqo::compile::compile(&case.db);
    let residues = approxsqo::compile::attach_residues(&case.query, &table, &case.db);
    let out = greedy_transform(&case.query, &residues, &case.config, &cost).map_err(|e| e.to_string())?;
    let cfg = &case.config;
    if out.corr + TOL < cfg.t_corr || out.comp + TOL < cfg.t_comp {
        return Err(format!("bounds ({}, {}) below thresholds ({}, {})", out.corr, out.comp, cfg.t_corr, cfg.t_comp));
    }
    let exact = evaluate(&case.query, &store).map_err(|e| e.to_string())?;
    let approx = evaluate(&out.rewritten, &store).map_err(|e| e.to_string())?;
    let removes = out.log.iter().any(|a| a.action == Action::Remove);
    let inserts = out.log.iter().any(|a| a.action != Action::Remove);
    let subset = |a: &AnswerSet, b: &AnswerSet| a.tuples.is_subset(&b.tuples);
    if removes && !inserts && !subset(&exact, &approx) {
        return Err(format!("removal-only rewrite {} lost answers", out.rewritten));
    }
    if inserts && !removes && !subset(&approx, &exact) {
        return Err(format!("insertion-only rewrite {} added answers", out.rewritten));
    }
    if certain && exact.tuples != approx.tuples {
        return Err(format!("certain constraints but {} differs from {}", out.rewritten, case.query));
    }
    Ok(())
}

/// A rule in a form that does not depend on variable names or body order:
/// the least rendering over all body orders with variables numbered by
/// first occurrence, head last.
pub fn rule_key(body: &[Atom], head: &Atom) -> String {
    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for i in 0..=p.len() {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }
    permutations(body.len())
        .into_iter()
        .map(|order| {
            let mut names: BTreeMap<Var, usize> = BTreeMap::new();
            let mut render = |a: &Atom| {
                let args: Vec<String> = a
                    .args
                    .iter()
                    .map(|t| match t {
                        Term::Var(v) => {
                            let n = names.len();
                            format!("#{}", names.entry(v.clone()).or_insert(n))
                        }
                        Term::Const(c) => c.to_string(),
                    })
                    .collect();
                format!("{}({})", a.pred, args.join(","))
            };
            let parts: Vec<String> = order.iter().map(|&i| render(&body[i])).collect();
            format!("{} -> {}", parts.join(" & "), render(head))
        })
        .min()
        .expect("at least one order")
}

pub fn mined_key(r: &MinedRule) -> (String, usize, usize) {
    let body: Vec<Atom> = r.clause.body.iter().map(|l| l.atom.clone()).collect();
    (rule_key(&body, r.clause.head.as_ref().expect("mined rules have heads")), r.support, r.body_count)
}

fn restricted_growth(len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::new();
        for s in out {
            let top = s.iter().map(|&x| x + 1).max().unwrap_or(0);
            for x in 0..=top {
                let mut t = s.clone();
                t.push(x);
                next.push(t);
            }
        }
        out = next;
    }
    out
}

fn connected(body: &[Atom]) -> bool {
    let mut reached = vec![false; body.len()];
    reached[0] = true;
    let mut grew = true;
    while grew {
        grew = false;
        for i in 0..body.len() {
            if reached[i] {
                continue;
            }
            let vi = body[i].vars();
            if (0..body.len()).any(|j| reached[j] && body[j].vars().iter().any(|v| vi.contains(v))) {
                reached[i] = true;
                grew = true;
            }
        }
    }
    reached.into_iter().all(|r| r)
}

/// Every connected rule with at most `max_body` variable-only body atoms
/// whose confidence reaches `min_conf`, found by enumerating all predicate
/// sequences and variable patterns and counting with nested loops.
pub fn enumerate_rules(db: &Database, max_body: usize, min_conf: f64) -> BTreeSet<(String, usize, usize)> {
    let mut schema: BTreeMap<String, usize> = BTreeMap::new();
    let mut facts: BTreeMap<String, BTreeSet<Vec<Const>>> = BTreeMap::new();
    for f in &db.edb {
        let h = f.head().expect("facts have heads");
        schema.insert(h.pred.to_string(), h.args.len());
        facts.entry(h.pred.to_string()).or_default().insert(h.ground_args().expect("ground"));
    }
    let preds: Vec<(String, usize)> = schema.into_iter().collect();
    let mut out = BTreeSet::new();
    let mut seen_bodies = BTreeSet::new();
    let mut seqs: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..max_body {
        seqs = seqs
            .into_iter()
            .flat_map(|s| {
                (0..preds.len()).map(move |p| {
                    let mut t = s.clone();
                    t.push(p);
                    t
                })
            })
            .collect();
        for seq in &seqs {
            let width: usize = seq.iter().map(|&p| preds[p].1).sum();
            for rgs in restricted_growth(width) {
                let mut k = 0;
                let body: Vec<Atom> = seq
                    .iter()
                    .map(|&p| {
                        let (name, n) = &preds[p];
                        let args = (0..*n)
                            .map(|_| {
                                k += 1;
                                Term::Var(Var::new(&format!("V{}", rgs[k - 1])))
                            })
                            .collect();
                        Atom::new(name, args)
                    })
                    .collect();
                let distinct: BTreeSet<&Atom> = body.iter().collect();
                if distinct.len() != body.len() || !connected(&body) {
                    continue;
                }
                let probe = Atom::new("_", Vec::new());
                if !seen_bodies.insert(rule_key(&body, &probe)) {
                    continue;
                }
                rules_of_body(&body, &preds, &facts, min_conf, &mut out);
            }
        }
    }
    out
}

fn rules_of_body(
    body: &[Atom],
    preds: &[(String, usize)],
    facts: &BTreeMap<String, BTreeSet<Vec<Const>>>,
    min_conf: f64,
    out: &mut BTreeSet<(String, usize, usize)>,
) {
    let vars: Vec<Var> = {
        let mut v: Vec<Var> = Vec::new();
        for a in body {
            for x in a.vars() {
                if !v.contains(&x) {
                    v.push(x);
                }
            }
        }
        v
    };
    let mut rows: BTreeSet<Vec<Const>> = BTreeSet::new();
    let mut stack = vec![(0usize, BTreeMap::<Var, Const>::new())];
    while let Some((i, s)) = stack.pop() {
        if i == body.len() {
            rows.insert(vars.iter().map(|v| s[v].clone()).collect());
            continue;
        }
        for row in facts.get(&*body[i].pred).into_iter().flatten() {
            let mut s2 = s.clone();
            let ok = body[i].args.iter().zip(row).all(|(t, c)| match t {
                Term::Var(v) => s2.entry(v.clone()).or_insert_with(|| c.clone()) == c,
                Term::Const(k) => k == c,
            });
            if ok {
                stack.push((i + 1, s2));
            }
        }
    }
    let den = rows.len();
    if den == 0 {
        return;
    }
    let mut emit = |head: Atom, num: usize| {
        if num as f64 / den as f64 >= min_conf {
            out.insert((rule_key(body, &head), num, den));
        }
    };
    for (p, n) in preds {
        let mut tuples: Vec<Vec<usize>> = vec![Vec::new()];
        for _ in 0..*n {
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    (0..vars.len()).map(move |i| {
                        let mut u = t.clone();
                        u.push(i);
                        u
                    })
                })
                .collect();
        }
        for t in tuples {
            let head = Atom::new(p, t.iter().map(|&i| Term::Var(vars[i].clone())).collect());
            if body.contains(&head) {
                continue;
            }
            let rel = facts.get(p.as_str());
            let num = rows
                .iter()
                .filter(|r| rel.is_some_and(|rel| rel.contains(&t.iter().map(|&i| r[i].clone()).collect::<Vec<_>>())))
                .count();
            emit(head, num);
        }
    }
    for (i, v) in vars.iter().enumerate() {
        let ints: Option<Vec<i64>> = rows
            .iter()
            .map(|r| match r[i] {
                Const::Int(x) => Some(x),
                _ => None,
            })
            .collect();
        let Some(ints) = ints else { continue };
        let distinct: BTreeSet<i64> = ints.iter().copied().collect();
        for c in distinct {
            let ge = ints.iter().filter(|&&x| x >= c).count();
            let le = ints.iter().filter(|&&x| x <= c).count();
            emit(Atom::cmp(approxsqo::CmpOp::Ge, Term::Var(v.clone()), Term::int(c)), ge);
            emit(Atom::cmp(approxsqo::CmpOp::Le, Term::Var(v.clone()), Term::int(c)), le);
        }
    }
}
