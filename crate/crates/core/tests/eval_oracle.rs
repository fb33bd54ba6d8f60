mod common;

use approxsqo::eval::{evaluate, ExtensionStore};
use approxsqo::synth::shape_case;
use approxsqo::{Atom, Literal, Query, Term};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A shape-case query, sometimes with a negated literal over bound
/// variables.
fn query(seed: u64) -> (approxsqo::Database, Query) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let case = shape_case(&mut rng);
    let mut q = case.query;
    if rng.gen_bool(0.5) {
        let x = q.body.iter().find(|l| !l.is_builtin()).and_then(|l| l.atom.vars().first().cloned()).unwrap();
        let p = if rng.gen_bool(0.5) { "b" } else { "c" };
        q.body.push(Literal::neg(Atom::new(p, vec![Term::Var(x)])));
    }
    (case.db, q)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn evaluator_matches_nested_loops(seed in any::<u64>()) {
        let (db, q) = query(seed);
        let store = ExtensionStore::from_database(&db).unwrap();
        prop_assert_eq!(evaluate(&q, &store).unwrap().tuples, common::naive_answers(&q, &db), "{}", q);
    }
}

#[test]
fn fixture_queries_match_nested_loops() {
    let doc = common::fixture();
    let store = ExtensionStore::from_database(&doc.db).unwrap();
    for q in doc.queries.iter().filter(|q| q.body.iter().all(|l| !doc.db.is_intensional(&l.atom.pred))) {
        assert_eq!(evaluate(q, &store).unwrap().tuples, common::naive_answers(q, &doc.db), "{q}");
    }
}
