mod common;

use std::collections::BTreeSet;

use approxsqo::eval::ExtensionStore;
use approxsqo::miner::{mine, MinerConfig};
use approxsqo::text::load;
use approxsqo::Database;

/// item/tag/flag over 200 items: 100 in two tagged categories, of which
/// `round(c * 100)` are flagged, and 100 untagged items, every other one
/// flagged.
pub fn planted_db(c: f64) -> Database {
    let flagged = (c * 100.0).round() as usize;
    let mut src = String::from("tag(t0). tag(t1).\n");
    for i in 0..200 {
        let cat = ["t0", "t1", "u0", "u1"][i / 50];
        src.push_str(&format!("item(i{i}, {cat}).\n"));
        if (i < 100 && i < flagged) || (i >= 100 && i % 2 == 0) {
            src.push_str(&format!("flag(i{i}).\n"));
        }
    }
    load(&src).unwrap().db
}

fn mined(db: &Database, max_body: usize, min_conf: f64) -> BTreeSet<(String, usize, usize)> {
    let store = ExtensionStore::from_database(db).unwrap();
    let cfg = MinerConfig { min_conf, max_body, predicates: None };
    mine(db, &store, &cfg).unwrap().iter().map(common::mined_key).collect()
}

#[test]
fn matches_enumeration_on_planted_data() {
    let db = planted_db(0.9);
    assert!(db.edb.len() <= 500);
    for min_conf in [0.5, 0.9] {
        assert_eq!(mined(&db, 2, min_conf), common::enumerate_rules(&db, 2, min_conf));
    }
}

#[test]
fn matches_enumeration_with_integers_and_three_atoms() {
    let db = load(
        "e(1, 2). e(2, 3). e(3, 1). e(2, 2). e(3, 4).
         n(1). n(2). n(4).
         w(1, 10). w(2, 20). w(3, 20). w(4, 40).",
    )
    .unwrap()
    .db;
    for min_conf in [0.5, 0.75, 1.0] {
        let got = mined(&db, 3, min_conf);
        assert!(!got.is_empty());
        assert_eq!(got, common::enumerate_rules(&db, 3, min_conf), "min_conf {min_conf}");
    }
}

#[test]
fn planted_confidence_is_recovered_exactly() {
    for c in [0.5, 0.7, 0.9, 0.99] {
        let db = planted_db(c);
        let key = common::rule_key(
            &[
                approxsqo::Atom::new("item", vec![approxsqo::Term::var("I"), approxsqo::Term::var("C")]),
                approxsqo::Atom::new("tag", vec![approxsqo::Term::var("C")]),
            ],
            &approxsqo::Atom::new("flag", vec![approxsqo::Term::var("I")]),
        );
        let n = (c * 100.0).round() as usize;
        assert!(mined(&db, 2, 0.5).contains(&(key, n, 100)), "c = {c}");
    }
}
