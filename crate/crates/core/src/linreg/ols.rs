use crate::linalg::select;
use crate::subset::FeatureSubset;
use nalgebra::{DMatrix, DVector, SVD};

/// Least-squares fit `z ~ b0 + b . x` on a subset of columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    /// One coefficient per entry of `columns`.
    pub coefficients: Vec<f64>,
    pub columns: Vec<usize>,
    pub sse: f64,
    /// Numerical rank of the centered design.
    pub rank: usize,
    pub n: usize,
    /// `sse / (n - rank - 1)`; NaN when there are no residual degrees of freedom.
    pub residual_variance: f64,
}

impl LinearModel {
    /// Number of fitted parameters including the intercept.
    pub fn n_params(&self) -> usize {
        self.rank + 1
    }

    /// Predicts from rows of the full feature matrix.
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_fn(x.nrows(), |i, _| {
            self.intercept
                + self
                    .columns
                    .iter()
                    .zip(&self.coefficients)
                    .map(|(&c, b)| x[(i, c)] * b)
                    .sum::<f64>()
        })
    }

    /// Predicts from a matrix that already holds only the model's columns.
    pub fn predict_selected(&self, x: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_fn(x.nrows(), |i, _| {
            self.intercept
                + self
                    .coefficients
                    .iter()
                    .enumerate()
                    .map(|(j, b)| x[(i, j)] * b)
                    .sum::<f64>()
        })
    }
}

/// Singular values below `RANK_TOL * s_max` count as zero.
const RANK_TOL: f64 = 1e-10;

/// Ordinary least squares with intercept on the columns of `subset`.
///
/// The coefficients are the minimum-norm solution on mean-centered columns,
/// so collinear columns (duplicates, one-hot groups) share weight instead of
/// failing; the intercept then makes residuals sum to zero.
pub fn ls_fit(x: &DMatrix<f64>, z: &DVector<f64>, subset: &FeatureSubset) -> LinearModel {
    let cols = subset.indices();
    let rows: Vec<usize> = (0..x.nrows()).collect();
    fit_columns(&select(x, &rows, &cols), z, cols)
}

/// As [`ls_fit`] on a matrix whose columns are exactly the model inputs.
pub fn ls_fit_all(x: &DMatrix<f64>, z: &DVector<f64>) -> LinearModel {
    fit_columns(x, z, (0..x.ncols()).collect())
}

fn fit_columns(xs: &DMatrix<f64>, z: &DVector<f64>, columns: Vec<usize>) -> LinearModel {
    let n = xs.nrows();
    let p = xs.ncols();
    let z_mean = z.mean();
    let zc = z.add_scalar(-z_mean);
    let (coefficients, rank, intercept) = if p == 0 || n == 0 {
        (Vec::new(), 0, z_mean)
    } else {
        let means: Vec<f64> = (0..p).map(|j| xs.column(j).mean()).collect();
        let xc = DMatrix::from_fn(n, p, |i, j| xs[(i, j)] - means[j]);
        let svd = SVD::new(xc, true, true);
        let u = svd.u.as_ref().expect("u requested");
        let vt = svd.v_t.as_ref().expect("v_t requested");
        let s_max = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
        let tol = s_max * RANK_TOL;
        let mut rank = 0;
        let mut beta = DVector::zeros(p);
        for (k, &s) in svd.singular_values.iter().enumerate() {
            if s > tol && s > 0.0 {
                rank += 1;
                let w = u.column(k).dot(&zc) / s;
                beta += vt.row(k).transpose() * w;
            }
        }
        let intercept = z_mean - (0..p).map(|j| means[j] * beta[j]).sum::<f64>();
        (beta.iter().copied().collect(), rank, intercept)
    };
    let mut model = LinearModel {
        intercept,
        coefficients,
        columns,
        sse: 0.0,
        rank,
        n,
        residual_variance: f64::NAN,
    };
    let fitted = model.predict_selected(xs);
    model.sse = z.iter().zip(fitted.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    let dof = n as f64 - rank as f64 - 1.0;
    if dof > 0.0 {
        model.residual_variance = model.sse / dof;
    }
    model
}
