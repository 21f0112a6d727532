//! Small dense-matrix helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

/// Copies the `rows` x `cols` block of `x`, in the given index order.
pub fn select(x: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| x[(rows[i], cols[j])])
}

pub fn select_rows(z: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
    DVector::from_fn(rows.len(), |i, _| z[rows[i]])
}

/// Row indices grouped by fold label: `(train, held_out)` for fold `f`.
pub fn fold_rows(folds: &[usize], f: usize) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::with_capacity(folds.len());
    let mut held = Vec::new();
    for (i, &g) in folds.iter().enumerate() {
        if g == f {
            held.push(i);
        } else {
            train.push(i);
        }
    }
    (train, held)
}

/// Number of folds implied by a label vector (max label + 1).
pub fn fold_count(folds: &[usize]) -> usize {
    folds.iter().max().map_or(0, |m| m + 1)
}
