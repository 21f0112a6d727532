//! Subset search engines and the evaluators that score candidate subsets.
//!
//! Every engine minimizes an [`Evaluator`] score (pooled 10-fold CV MMRE on
//! the training split). The ridge-wrapper evaluator scores with the final
//! estimator itself; the least-squares filter uses linear least squares.

mod ga;
mod greedy;
mod oracle;

pub use crate::subset::FeatureSubset;
pub use ga::{ga_select, GaConfig, GaResult};
pub use greedy::{backward_eliminate, forward_select, SearchResult};
pub use oracle::{exhaustive_oracle, OracleError, ORACLE_MAX_FEATURES};

use crate::linalg::fold_count;
use crate::linreg::ls_cv_score;
use crate::ridge::{cv_score, RidgeConfig};
use crate::WORST_SCORE;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("{rows} rows, {targets} targets and {folds} fold labels")]
    Shape { rows: usize, targets: usize, folds: usize },
    #[error("effort values must be positive")]
    NonPositiveTarget,
    #[error("fold {0} has no rows")]
    EmptyFold(usize),
    #[error("invalid GA configuration: {0}")]
    InvalidConfig(String),
}

/// Training rows handed to a search: normalized features, positive
/// targets and a fold label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    x: DMatrix<f64>,
    z: DVector<f64>,
    folds: Vec<usize>,
}

impl TrainingSet {
    pub fn new(x: DMatrix<f64>, z: DVector<f64>, folds: Vec<usize>) -> Result<Self, SearchError> {
        if x.nrows() != z.len() || folds.len() != z.len() {
            return Err(SearchError::Shape {
                rows: x.nrows(),
                targets: z.len(),
                folds: folds.len(),
            });
        }
        if z.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(SearchError::NonPositiveTarget);
        }
        let k = fold_count(&folds);
        for f in 0..k {
            if !folds.contains(&f) {
                return Err(SearchError::EmptyFold(f));
            }
        }
        Ok(Self { x, z, folds })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn z(&self) -> &DVector<f64> {
        &self.z
    }

    pub fn folds(&self) -> &[usize] {
        &self.folds
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvaluatorKind {
    RidgeWrapper,
    LsFilter,
}

/// Scores a subset on a training set; lower is better. Implementations are
/// deterministic and give the empty subset [`WORST_SCORE`].
pub trait Evaluator: Sync {
    fn kind(&self) -> EvaluatorKind;
    fn score(&self, data: &TrainingSet, subset: &FeatureSubset) -> f64;
}

/// Pooled CV MMRE of dual-form ridge regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeWrapper(pub RidgeConfig);

impl Evaluator for RidgeWrapper {
    fn kind(&self) -> EvaluatorKind {
        EvaluatorKind::RidgeWrapper
    }

    fn score(&self, data: &TrainingSet, subset: &FeatureSubset) -> f64 {
        sanitize(cv_score(&data.x, &data.z, subset, &data.folds, &self.0))
    }
}

/// Pooled CV MMRE of ordinary least squares.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LsFilter;

impl Evaluator for LsFilter {
    fn kind(&self) -> EvaluatorKind {
        EvaluatorKind::LsFilter
    }

    fn score(&self, data: &TrainingSet, subset: &FeatureSubset) -> f64 {
        sanitize(ls_cv_score(&data.x, &data.z, subset, &data.folds))
    }
}

fn sanitize(s: f64) -> f64 {
    if s.is_nan() {
        WORST_SCORE
    } else {
        s
    }
}

/// Total order on scores: lower first, NaN treated as the sentinel.
pub fn cmp_scores(a: f64, b: f64) -> Ordering {
    sanitize(a).total_cmp(&sanitize(b))
}
