//! Combination functions for belief intervals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BeliefInterval;

/// An associative and commutative operator merging the belief factors of
/// several derivations of the same atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combination {
    Dempster,
    Max,
    Min,
}

impl Combination {
    pub const ALL: [Combination; 3] = [Combination::Dempster, Combination::Max, Combination::Min];

    pub fn name(self) -> &'static str {
        match self {
            Combination::Dempster => "ds",
            Combination::Max => "max",
            Combination::Min => "min",
        }
    }

    /// Combine two intervals.
    pub fn combine2(self, a: BeliefInterval, b: BeliefInterval) -> Result<BeliefInterval> {
        match self {
            Combination::Max => Ok(BeliefInterval { v: a.v.max(b.v), w: a.w.max(b.w) }),
            Combination::Min => Ok(BeliefInterval { v: a.v.min(b.v), w: a.w.min(b.w) }),
            Combination::Dempster => dempster(a, b),
        }
    }

    /// Fold over a multiset. The empty multiset yields `[0, 1]`.
    pub fn combine(self, items: &[BeliefInterval]) -> Result<BeliefInterval> {
        let mut it = items.iter().copied();
        let Some(first) = it.next() else {
            return Ok(BeliefInterval::IGNORANT);
        };
        it.try_fold(first, |acc, x| self.combine2(acc, x))
    }

    /// The belief component of [`Combination::combine`].
    pub fn combine_v(self, items: &[BeliefInterval]) -> Result<f64> {
        self.combine(items).map(|b| b.v)
    }

    /// Check that two certain derivations stay certain, which is what lets
    /// disjunctive bodies be split into separate clauses.
    pub fn check_certain_identity(self) -> Result<()> {
        let c = self.combine2(BeliefInterval::CERTAIN, BeliefInterval::CERTAIN)?;
        if c == BeliefInterval::CERTAIN {
            Ok(())
        } else {
            Err(Error::BadCombination)
        }
    }
}

fn is_exact(b: BeliefInterval, v: f64) -> bool {
    b.v == v && b.w == v
}

fn dempster(a: BeliefInterval, b: BeliefInterval) -> Result<BeliefInterval> {
    if (is_exact(a, 0.0) && is_exact(b, 1.0)) || (is_exact(a, 1.0) && is_exact(b, 0.0)) {
        return Ok(BeliefInterval::CERTAIN);
    }
    let k = 1.0 + a.v * b.w + b.v * a.w - a.v - b.v;
    if k <= 0.0 {
        return Err(Error::DempsterDegenerate { left: a, right: b });
    }
    let v = (a.v * b.w + b.v * a.w - a.v * b.v) / k;
    let w = a.w * b.w / k;
    // Rounding can push the quotients a hair outside [0, 1] or invert them.
    let v = v.clamp(0.0, 1.0);
    let w = w.clamp(v, 1.0);
    Ok(BeliefInterval { v, w })
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Combination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ds" | "dempster" => Ok(Combination::Dempster),
            "max" => Ok(Combination::Max),
            "min" => Ok(Combination::Min),
            other => Err(Error::Config(format!("unknown combination function `{other}` (expected ds, max or min)"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(v: f64) -> BeliefInterval {
        BeliefInterval::point(v)
    }

    /// Dempster on point intervals written out independently of the K form.
    fn dempster_point_oracle(a: f64, b: f64) -> f64 {
        a * b / (1.0 + 2.0 * a * b - a - b)
    }

    #[test]
    fn dempster_goldens() {
        let ds = Combination::Dempster;
        assert_eq!(ds.combine(&[BeliefInterval::FALSE, BeliefInterval::CERTAIN]).unwrap(), BeliefInterval::CERTAIN);
        let x = ds.combine(&[p(0.4), p(0.8)]).unwrap();
        assert!((x.v - 8.0 / 11.0).abs() < 1e-12 && (x.w - 8.0 / 11.0).abs() < 1e-12);
        assert!(x.v < 0.8);
        let y = ds.combine(&[p(0.9), p(0.7)]).unwrap();
        assert!((y.v - 21.0 / 22.0).abs() < 1e-12);
        assert!((ds.combine_v(&[p(0.9), p(0.8)]).unwrap() - 0.72 / 0.74).abs() < 1e-12);
        assert!((ds.combine_v(&[p(0.8), p(0.8)]).unwrap() - 16.0 / 17.0).abs() < 1e-12);
    }

    #[test]
    fn max_min_and_empty() {
        let a = BeliefInterval::new(0.5, 0.6).unwrap();
        let b = BeliefInterval::new(0.7, 0.8).unwrap();
        assert_eq!(Combination::Max.combine(&[a, b]).unwrap(), b);
        assert_eq!(Combination::Min.combine(&[a, b]).unwrap(), a);
        for phi in Combination::ALL {
            assert_eq!(phi.combine(&[]).unwrap(), BeliefInterval::IGNORANT);
            assert_eq!(phi.combine(&[a]).unwrap(), a);
            phi.check_certain_identity().unwrap();
        }
    }

    #[test]
    fn ignorance_is_neutral_for_dempster() {
        let b = BeliefInterval::new(0.3, 0.9).unwrap();
        let r = Combination::Dempster.combine2(BeliefInterval::IGNORANT, b).unwrap();
        assert!((r.v - b.v).abs() < 1e-15 && (r.w - b.w).abs() < 1e-15);
    }

    #[test]
    fn parse_names() {
        assert_eq!("ds".parse::<Combination>().unwrap(), Combination::Dempster);
        assert_eq!("MAX".parse::<Combination>().unwrap(), Combination::Max);
        assert!("avg".parse::<Combination>().is_err());
    }

    fn interval() -> impl Strategy<Value = BeliefInterval> {
        (0u32..=20, 0u32..=20).prop_map(|(a, b)| {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            BeliefInterval::new(lo as f64 / 20.0, hi as f64 / 20.0).unwrap()
        })
    }

    proptest! {
        #[test]
        fn fold_order_is_irrelevant(items in prop::collection::vec(interval(), 0..6), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = items.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            for phi in Combination::ALL {
                match (phi.combine(&items), phi.combine(&shuffled)) {
                    (Ok(a), Ok(b)) => {
                        prop_assert!((a.v - b.v).abs() < 1e-12 && (a.w - b.w).abs() < 1e-12);
                        prop_assert!(a.is_valid());
                    }
                    (Err(_), Err(_)) => {}
                    (a, b) => prop_assert!(false, "{phi}: {a:?} vs {b:?}"),
                }
            }
        }

        #[test]
        fn dempster_points_match_closed_form(a in 1u32..20, b in 1u32..20) {
            let (a, b) = (a as f64 / 20.0, b as f64 / 20.0);
            let got = Combination::Dempster.combine_v(&[p(a), p(b)]).unwrap();
            prop_assert!((got - dempster_point_oracle(a, b)).abs() < 1e-12);
        }
    }
}
