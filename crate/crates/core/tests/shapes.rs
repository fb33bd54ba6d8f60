mod common;

use approxsqo::synth::{certain_case, shape_case};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn random_rewrites_keep_their_shape(seed in any::<u64>()) {
        let case = shape_case(&mut ChaCha8Rng::seed_from_u64(seed));
        if let Err(e) = common::check_shape(&case, false) {
            prop_assert!(false, "{e}\n{}", approxsqo::text::dump(&case.db, std::slice::from_ref(&case.query)));
        }
    }

    #[test]
    fn certain_constraints_preserve_answers(seed in any::<u64>()) {
        let case = certain_case(&mut ChaCha8Rng::seed_from_u64(seed));
        if let Err(e) = common::check_shape(&case, true) {
            prop_assert!(false, "{e}\n{}", approxsqo::text::dump(&case.db, std::slice::from_ref(&case.query)));
        }
    }
}
