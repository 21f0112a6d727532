use super::{cmp_scores, Evaluator, FeatureSubset, TrainingSet};
use crate::parallel;
use std::cmp::Ordering;
use thiserror::Error;

pub const ORACLE_MAX_FEATURES: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("exhaustive search is capped at {ORACLE_MAX_FEATURES} features, got {0}")]
    TooManyFeatures(usize),
    #[error("no features")]
    NoFeatures,
}

/// Scores all `2^n - 1` non-empty subsets and returns the minimizer. Subsets
/// are enumerated by ascending bit mask; the first minimum wins ties.
pub fn exhaustive_oracle(data: &TrainingSet, eval: &dyn Evaluator) -> Result<(FeatureSubset, f64), OracleError> {
    let d = data.n_features();
    if d == 0 {
        return Err(OracleError::NoFeatures);
    }
    if d > ORACLE_MAX_FEATURES {
        return Err(OracleError::TooManyFeatures(d));
    }
    let total = (1usize << d) - 1;
    let scores = parallel::map_range(total, |k| eval.score(data, &FeatureSubset::from_mask(d, k as u64 + 1)));
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if cmp_scores(s, scores[best]) == Ordering::Less {
            best = k;
        }
    }
    Ok((FeatureSubset::from_mask(d, best as u64 + 1), scores[best]))
}
