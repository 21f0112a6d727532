//! Pooled k-fold cross-validation MMRE.

use crate::linalg::{fold_count, fold_rows, select, select_rows};
use crate::metrics::relative_error;
use crate::WORST_SCORE;
use nalgebra::{DMatrix, DVector};

/// Trains on all folds but one, predicts the held-out fold, and returns the
/// mean relative error over every project once all folds have been held out.
///
/// `fit_predict(x_train, z_train, x_held)` returns predictions for the held
/// rows, or `None` when the fit fails; any failure, non-positive actual, or
/// non-finite result yields [`WORST_SCORE`].
pub fn pooled_mmre<F>(x: &DMatrix<f64>, z: &DVector<f64>, folds: &[usize], cols: &[usize], fit_predict: F) -> f64
where
    F: Fn(&DMatrix<f64>, &DVector<f64>, &DMatrix<f64>) -> Option<DVector<f64>>,
{
    let k = fold_count(folds);
    let mut total = 0.0;
    let mut count = 0usize;
    for f in 0..k {
        let (tr, te) = fold_rows(folds, f);
        if te.is_empty() {
            continue;
        }
        if tr.is_empty() {
            return WORST_SCORE;
        }
        let x_tr = select(x, &tr, cols);
        let z_tr = select_rows(z, &tr);
        let x_te = select(x, &te, cols);
        let Some(pred) = fit_predict(&x_tr, &z_tr, &x_te) else {
            return WORST_SCORE;
        };
        for (k, &row) in te.iter().enumerate() {
            match relative_error(z[row], pred[k]) {
                Ok(re) => total += re,
                Err(_) => return WORST_SCORE,
            }
            count += 1;
        }
    }
    let m = total / count as f64;
    if count == 0 || !m.is_finite() {
        WORST_SCORE
    } else {
        m
    }
}
