use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{seeded, stream};

/// Split fractions and the seed of the permutation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.85,
            val: 0.10,
            test: 0.05,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|&f| !(f > 0.0)) {
            return Err(Error::Validation("split fractions must be positive".into()));
        }
        let sum: f64 = parts.iter().sum();
        if libm::fabs(sum - 1.0) > 1e-12 {
            return Err(Error::Validation(format!("split fractions sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// `(train, val, test)` sizes for `n` samples: val and test are floored,
    /// train takes the remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        // the nudge keeps products like 0.1 * 30 = 3.0000000000000004 and
        // 0.05 * n values a few ulps below an integer on the intended side
        let floor = |f: f64| libm::floor(f * n as f64 + 1e-9) as usize;
        let test = floor(self.test);
        let val = floor(self.val);
        (n - val - test, val, test)
    }
}

/// Disjoint, exhaustive index lists, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Randomly partitions `0..n` into train/val/test.
///
/// A Fisher-Yates shuffle driven by the split stream of
/// [`crate::rng::seeded`] produces a permutation; its first `n_test` entries
/// form the test set, the next `n_val` the validation set, and the rest the
/// training set.
pub fn split_dataset(ds: &Dataset, spec: &SplitSpec) -> Result<Split> {
    split_indices(ds.n_samples(), spec)
}

pub(crate) fn split_indices(n: usize, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    if n < 3 {
        return Err(Error::Precondition(format!("split needs n >= 3, got {n}")));
    }
    let (_, n_val, n_test) = spec.sizes(n);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seeded(spec.seed, stream::SPLIT));
    let mut test = perm[..n_test].to_vec();
    let mut val = perm[n_test..n_test + n_val].to_vec();
    let mut train = perm[n_test + n_val..].to_vec();
    test.sort_unstable();
    val.sort_unstable();
    train.sort_unstable();
    Ok(Split { train, val, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_sizes() {
        let s = SplitSpec::default();
        assert_eq!(s.sizes(100), (85, 10, 5));
        assert_eq!(s.sizes(20), (17, 2, 1));
        assert_eq!(s.sizes(3), (3, 0, 0));
        let split = split_indices(100, &s).unwrap();
        assert_eq!((split.train.len(), split.val.len(), split.test.len()), (85, 10, 5));
    }

    #[test]
    fn seeded_determinism() {
        let a = split_indices(50, &SplitSpec::with_seed(3)).unwrap();
        assert_eq!(a, split_indices(50, &SplitSpec::with_seed(3)).unwrap());
        assert_ne!(a, split_indices(50, &SplitSpec::with_seed(4)).unwrap());
    }

    #[test]
    fn too_small_or_bad_fractions() {
        assert!(matches!(split_indices(2, &SplitSpec::default()), Err(Error::Precondition(_))));
        let bad = SplitSpec { train: 0.8, ..SplitSpec::default() };
        assert!(matches!(split_indices(10, &bad), Err(Error::Validation(_))));
    }

    proptest! {
        #[test]
        fn partition_is_disjoint_and_exhaustive(n in 3usize..500, seed in any::<u64>()) {
            let s = split_indices(n, &SplitSpec::with_seed(seed)).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
