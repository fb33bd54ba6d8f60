use approxsqo::synth::{planted, shape_case, PlantedConfig};
use approxsqo::text::{dump, load};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn dump_reloads_to_the_same_database(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let case = shape_case(&mut rng);
        let text = dump(&case.db, std::slice::from_ref(&case.query));
        let doc = load(&text).unwrap();
        prop_assert_eq!(&doc.db, &case.db);
        prop_assert_eq!(&doc.queries, &vec![case.query.clone()]);

        let cfg = PlantedConfig { items: 30, ..PlantedConfig::default() };
        let p = planted(&cfg, &mut rng).unwrap();
        let q = p.random_query("q", &mut rng);
        let doc = load(&dump(&p.db, std::slice::from_ref(&q))).unwrap();
        prop_assert_eq!(&doc.db, &p.db);
        prop_assert_eq!(doc.queries, vec![q]);
    }
}
