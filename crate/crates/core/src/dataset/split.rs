use super::{Dataset, DatasetError};
use crate::rng::{derive_seed, rng_from};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub const TRAIN_FRACTION: f64 = 0.8;
pub const N_FOLDS: usize = 10;

/// One random 80/20 partition plus the 10-fold assignment of its training rows.
///
/// `train[k]` is a dataset row index and `folds[k]` its fold label; the
/// training rows are kept in shuffled order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub partition_id: usize,
    pub seed: u64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub folds: Vec<usize>,
}

impl SplitPlan {
    /// Draws partition `partition_id` of an `n`-row dataset. The row
    /// permutation is a Fisher-Yates shuffle driven by ChaCha8 seeded with
    /// `derive_seed(master_seed, [partition_id])`.
    pub fn draw(n: usize, partition_id: usize, master_seed: u64) -> Result<Self, DatasetError> {
        let n_train = train_size(n);
        if n_train < N_FOLDS || n_train == n {
            return Err(DatasetError::TooFewRows(n));
        }
        let seed = derive_seed(master_seed, &[partition_id as u64]);
        let mut rng = rng_from(seed);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let test = perm.split_off(n_train);
        let folds = (0..n_train).map(|k| k % N_FOLDS).collect();
        Ok(Self {
            partition_id,
            seed,
            train: perm,
            test,
            folds,
        })
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; N_FOLDS];
        for &f in &self.folds {
            sizes[f] += 1;
        }
        sizes
    }
}

/// `round(0.8 n)`, ties to even. For integer `n` the product never lands on
/// a half, so the tie rule is documentation only.
pub fn train_size(n: usize) -> usize {
    (TRAIN_FRACTION * n as f64).round_ties_even() as usize
}

pub fn make_splits(dataset: &Dataset, n_partitions: usize, master_seed: u64) -> Result<Vec<SplitPlan>, DatasetError> {
    if n_partitions == 0 {
        return Err(DatasetError::Invalid("at least one partition is required".into()));
    }
    (0..n_partitions)
        .map(|p| SplitPlan::draw(dataset.n_projects(), p, master_seed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sizes_for_known_datasets() {
        assert_eq!(train_size(77), 62);
        assert_eq!(train_size(467), 374);
        let p = SplitPlan::draw(77, 3, 9).unwrap();
        assert_eq!((p.train.len(), p.test.len()), (62, 15));
        let p = SplitPlan::draw(467, 0, 9).unwrap();
        assert_eq!((p.train.len(), p.test.len()), (374, 93));
    }

    #[test]
    fn deterministic() {
        assert_eq!(SplitPlan::draw(77, 4, 123).unwrap(), SplitPlan::draw(77, 4, 123).unwrap());
        assert_ne!(SplitPlan::draw(77, 4, 123).unwrap(), SplitPlan::draw(77, 5, 123).unwrap());
    }

    #[test]
    fn too_small() {
        assert!(SplitPlan::draw(10, 0, 1).is_err());
    }

    proptest! {
        #[test]
        fn plan_invariants(n in 20usize..600, pid in 0usize..20, seed in any::<u64>()) {
            let p = SplitPlan::draw(n, pid, seed).unwrap();
            let mut all: Vec<usize> = p.train.iter().chain(&p.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(p.train.len(), train_size(n));
            let lo = p.train.len() / N_FOLDS;
            let hi = p.train.len().div_ceil(N_FOLDS);
            for s in p.fold_sizes() {
                prop_assert!(s == lo || s == hi);
            }
        }
    }
}
