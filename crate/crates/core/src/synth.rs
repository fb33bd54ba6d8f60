//! Synthetic databases for experiments and property tests.
//!
//! * [`planted`] builds an item/category database where the constraint
//!   `flag(I) :- item(I, C), tag(C)` holds with at least the requested
//!   confidence inside every tagged category.
//! * [`shape_case`] and [`certain_case`] build tiny random databases,
//!   constraints and queries.
//! * [`join_elimination`] builds a large instance where a certain
//!   referential constraint lets the rewriter drop a join.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::eval::ExtensionStore;
use crate::miner::certainty_ratio;
use crate::model::{
    AnnotatedClause, Atom, BeliefInterval, Clause, CmpOp, Const, Database, Literal, Query, Term, Var,
};
use crate::transform::RewriteConfig;
use crate::blp::Combination;

fn v(n: &str) -> Term {
    Term::var(n)
}

fn pos(p: &str, args: Vec<Term>) -> Literal {
    Literal::pos(Atom::new(p, args))
}

fn fact(db: &mut Database, p: &str, args: Vec<Const>) {
    let id = format!("f{}", db.edb.len() + 1);
    db.edb.push(AnnotatedClause::fact(id, Atom::new(p, args.into_iter().map(Term::Const).collect())));
}

fn cat(k: usize) -> Const {
    Const::sym(&format!("c{k}"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedConfig {
    pub items: usize,
    pub categories: usize,
    pub tagged: usize,
    /// Links per item.
    pub links: usize,
    pub hubs: usize,
    pub confidence: f64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig { items: 200, categories: 10, tagged: 3, links: 2, hubs: 5, confidence: 0.9 }
    }
}

#[derive(Clone, Debug)]
pub struct Planted {
    pub config: PlantedConfig,
    pub db: Database,
}

/// Generate a planted database.
///
/// Inside each tagged category exactly `ceil(c * m)` of its `m` items are
/// flagged; items of other categories are flagged with probability 1/2.
/// Constraint `P1` is annotated with `c`. Constraint `P2`,
/// `flag(I) :- link(I, J), hub(J)`, is annotated with its measured
/// confidence and left out when that is below 1/2.
pub fn planted(cfg: &PlantedConfig, rng: &mut impl Rng) -> Result<Planted> {
    let mut db = Database::new();
    let mut members: Vec<Vec<i64>> = vec![Vec::new(); cfg.categories.max(1)];
    for i in 0..cfg.items as i64 {
        let k = rng.gen_range(0..members.len());
        members[k].push(i);
        fact(&mut db, "item", vec![Const::Int(i), cat(k)]);
    }
    for k in 0..cfg.tagged.min(members.len()) {
        fact(&mut db, "tag", vec![cat(k)]);
    }
    for (k, m) in members.iter().enumerate() {
        let mut m = m.clone();
        m.shuffle(rng);
        let flagged = if k < cfg.tagged {
            ((cfg.confidence * m.len() as f64) - 1e-9).ceil().max(0.0) as usize
        } else {
            m.iter().filter(|_| rng.gen_bool(0.5)).count()
        };
        let mut chosen: Vec<i64> = m.into_iter().take(flagged).collect();
        chosen.sort_unstable();
        for i in chosen {
            fact(&mut db, "flag", vec![Const::Int(i)]);
        }
    }
    let n = cfg.items as i64;
    if n > 1 {
        for i in 0..n {
            let mut targets: Vec<i64> = (0..n).filter(|&j| j != i).collect();
            targets.shuffle(rng);
            targets.truncate(cfg.links);
            targets.sort_unstable();
            for j in targets {
                fact(&mut db, "link", vec![Const::Int(i), Const::Int(j)]);
            }
        }
    }
    let mut ids: Vec<i64> = (0..n).collect();
    ids.shuffle(rng);
    ids.truncate(cfg.hubs);
    ids.sort_unstable();
    for j in ids {
        fact(&mut db, "hub", vec![Const::Int(j)]);
    }

    let p1 = Clause::new(
        Some(Atom::new("flag", vec![v("I")])),
        vec![pos("item", vec![v("I"), v("C")]), pos("tag", vec![v("C")])],
    );
    db.ic.push(AnnotatedClause::constraint("P1", p1, BeliefInterval::point(cfg.confidence)));
    let p2 = Clause::new(
        Some(Atom::new("flag", vec![v("I")])),
        vec![pos("link", vec![v("I"), v("J")]), pos("hub", vec![v("J")])],
    );
    let ratio = certainty_ratio(&p2, &ExtensionStore::from_database(&db)?)?;
    if ratio.den > 0 && ratio.value() >= 0.5 {
        db.ic.push(AnnotatedClause::constraint("P2", p2, BeliefInterval::point(ratio.value())));
    }
    Ok(Planted { config: cfg.clone(), db })
}

impl Planted {
    /// A random query over the planted schema that selects flagged items
    /// of tagged categories, optionally one category and their links.
    pub fn random_query(&self, name: &str, rng: &mut impl Rng) -> Query {
        let mut body = vec![
            pos("item", vec![v("I"), v("C")]),
            pos("tag", vec![v("C")]),
            pos("flag", vec![v("I")]),
        ];
        let mut out = vec![Var::new("I")];
        if rng.gen_bool(0.5) && self.config.tagged > 0 {
            let k = rng.gen_range(0..self.config.tagged.min(self.config.categories.max(1)));
            body.push(Literal::pos(Atom::cmp(CmpOp::Eq, v("C"), Term::Const(cat(k)))));
        } else {
            out.push(Var::new("C"));
        }
        if rng.gen_bool(0.5) {
            body.push(pos("link", vec![v("I"), v("J")]));
            out.push(Var::new("J"));
        }
        body.shuffle(rng);
        Query::new(name, out, body)
    }

    /// A configuration that lets `flag` count as large and `tag` as small.
    pub fn rewrite_config(&self, t_corr: f64) -> RewriteConfig {
        let store_size = |p: &str| self.db.edb.iter().filter(|f| f.head().is_some_and(|h| &*h.pred == p)).count();
        RewriteConfig {
            t_corr,
            t_comp: t_corr,
            phi: Combination::Dempster,
            large_cutoff: Some(store_size("flag").max(1)),
            small_cutoff: Some(store_size("tag").max(1)),
        }
    }
}

/// A tiny random database with constraints, a query and a rewrite
/// configuration.
#[derive(Clone, Debug)]
pub struct ShapeCase {
    pub db: Database,
    pub query: Query,
    pub config: RewriteConfig,
}

const DOMAIN: i64 = 6;

fn random_facts(db: &mut Database, rng: &mut impl Rng) {
    let int = Const::Int;
    for _ in 0..rng.gen_range(4..12) {
        fact(db, "a", vec![int(rng.gen_range(0..DOMAIN)), int(rng.gen_range(0..DOMAIN))]);
    }
    for p in ["b", "c"] {
        for x in 0..DOMAIN {
            if rng.gen_bool(0.5) {
                fact(db, p, vec![int(x)]);
            }
        }
    }
    for _ in 0..rng.gen_range(2..10) {
        fact(db, "d", vec![int(rng.gen_range(0..DOMAIN)), int(rng.gen_range(0..DOMAIN))]);
    }
    dedup_facts(db);
}

fn dedup_facts(db: &mut Database) {
    let mut seen = std::collections::BTreeSet::new();
    db.edb.retain(|f| seen.insert(f.clause.head.clone()));
    for (i, f) in db.edb.iter_mut().enumerate() {
        f.id = format!("f{}", i + 1);
    }
}

fn constraint_templates(k: i64) -> Vec<Clause> {
    let x = || v("X");
    let y = || v("Y");
    vec![
        Clause::new(Some(Atom::new("b", vec![x()])), vec![pos("a", vec![x(), y()])]),
        Clause::new(Some(Atom::new("c", vec![y()])), vec![pos("a", vec![x(), y()])]),
        Clause::new(Some(Atom::new("d", vec![x(), y()])), vec![pos("a", vec![x(), y()]), pos("b", vec![x()])]),
        Clause::new(Some(Atom::new("b", vec![x()])), vec![pos("d", vec![x(), y()]), pos("c", vec![y()])]),
        Clause::new(Some(Atom::cmp(CmpOp::Ge, y(), Term::int(k))), vec![pos("a", vec![x(), y()])]),
        Clause::new(Some(Atom::new("c", vec![x()])), vec![pos("b", vec![x()])]),
    ]
}

fn random_query(rng: &mut impl Rng) -> Query {
    let pool = [
        pos("a", vec![v("X"), v("Y")]),
        pos("b", vec![v("X")]),
        pos("c", vec![v("Y")]),
        pos("d", vec![v("X"), v("Y")]),
        pos("a", vec![v("Y"), v("Z")]),
        pos("c", vec![v("Z")]),
    ];
    let n = rng.gen_range(2..=4);
    let mut body: Vec<Literal> = pool.choose_multiple(rng, n).cloned().collect();
    if rng.gen_bool(0.3) {
        let var = body[0].atom.vars()[0].clone();
        body.push(Literal::pos(Atom::cmp(CmpOp::Ge, Term::Var(var), Term::int(rng.gen_range(0..DOMAIN)))));
    }
    let mut vars = crate::model::body_vars(&body);
    vars.shuffle(rng);
    vars.truncate(rng.gen_range(1..=vars.len()));
    vars.sort();
    Query::new("q", vars, body)
}

fn random_config(rng: &mut impl Rng) -> RewriteConfig {
    let grid = |rng: &mut dyn rand::RngCore| 0.5 + 0.05 * rng.gen_range(0..=10) as f64;
    RewriteConfig {
        t_corr: grid(rng),
        t_comp: grid(rng),
        phi: *Combination::ALL.choose(rng).expect("non-empty"),
        large_cutoff: Some(rng.gen_range(1..=8)),
        small_cutoff: Some(rng.gen_range(1..=8)),
    }
}

/// Random facts, one to four random constraints with beliefs on a 0.05
/// grid in `[0.5, 1]`, a random query and a random configuration.
pub fn shape_case(rng: &mut impl Rng) -> ShapeCase {
    let mut db = Database::new();
    random_facts(&mut db, rng);
    let templates = constraint_templates(rng.gen_range(0..DOMAIN));
    let count = rng.gen_range(1..=4);
    let chosen: Vec<Clause> = templates.choose_multiple(rng, count).cloned().collect();
    for (i, c) in chosen.into_iter().enumerate() {
        let b = 0.5 + 0.05 * rng.gen_range(0..=10) as f64;
        db.ic.push(AnnotatedClause::constraint(format!("IC{}", i + 1), c, BeliefInterval::point(b)));
    }
    ShapeCase { db, query: random_query(rng), config: random_config(rng) }
}

/// Like [`shape_case`], but every constraint is certain and the facts are
/// repaired so that all constraints hold.
pub fn certain_case(rng: &mut impl Rng) -> ShapeCase {
    let mut case = shape_case(rng);
    for c in &mut case.db.ic {
        c.belief = BeliefInterval::CERTAIN;
    }
    // comparison heads only restrict `a`
    let bounds: Vec<i64> = case
        .db
        .ic
        .iter()
        .filter_map(|c| c.head().filter(|h| h.is_builtin()).and_then(|h| match h.args[1] {
            Term::Const(Const::Int(k)) => Some(k),
            _ => None,
        }))
        .collect();
    case.db.edb.retain(|f| {
        let h = f.head().expect("facts have heads");
        &*h.pred != "a" || bounds.iter().all(|&k| matches!(h.args[1], Term::Const(Const::Int(y)) if y >= k))
    });
    saturate(&mut case.db);
    case
}

/// Add the facts the atom-headed constraints demand, until none is missing.
fn saturate(db: &mut Database) {
    loop {
        let store = ExtensionStore::from_database(db).expect("generated facts are well-formed");
        let mut missing: Vec<Atom> = Vec::new();
        for c in &db.ic {
            let Some(h) = c.head().filter(|h| !h.is_builtin()) else { continue };
            let vars = c.clause.vars();
            let rows = crate::eval::solutions(&c.clause.body, &store, &vars).expect("safe constraint bodies");
            for row in rows {
                let s: crate::unify::Substitution =
                    vars.iter().cloned().zip(row.into_iter().map(Term::Const)).collect();
                let a = crate::unify::apply_substitution(h, &s);
                let args = a.ground_args().expect("range restricted");
                if !store.contains(&a.pred, &args) && !missing.contains(&a) {
                    missing.push(a);
                }
            }
        }
        if missing.is_empty() {
            return;
        }
        for a in missing {
            let id = format!("f{}", db.edb.len() + 1);
            db.edb.push(AnnotatedClause::fact(id, a));
        }
    }
}

/// An order/customer database with `customers` customers and `orders`
/// orders, each placed by a random customer, the certain constraint
/// `customer(K) :- order(I, K)`, and the query
/// `q(I) ?- order(I, K), customer(K)`, whose customer join is redundant.
pub fn join_elimination(orders: usize, customers: usize, rng: &mut impl Rng) -> (Database, Query) {
    let mut db = Database::new();
    for k in 0..customers.max(1) as i64 {
        fact(&mut db, "customer", vec![Const::Int(k)]);
    }
    for i in 0..orders as i64 {
        let k = rng.gen_range(0..customers.max(1) as i64);
        fact(&mut db, "order", vec![Const::Int(i), Const::Int(k)]);
    }
    let c = Clause::new(Some(Atom::new("customer", vec![v("K")])), vec![pos("order", vec![v("I"), v("K")])]);
    db.ic.push(AnnotatedClause::constraint("R1", c, BeliefInterval::CERTAIN));
    let q = Query::new("q", vec![Var::new("I")], vec![pos("order", vec![v("I"), v("K")]), pos("customer", vec![v("K")])]);
    (db, q)
}
