//! Dual-form kernel ridge regression.
//!
//! For training inputs `x_1..x_n` with efforts `z`, the prediction at `x` is
//! `z (K + aI)^{-1} k` where `K[i][j] = K(x_i, x_j)` and `k[i] = K(x_i, x)`.
//! The fit solves `(K + aI) alpha = z` once (Cholesky for `a > 0`); each
//! prediction is then the dot product `k . alpha`. The primal weight
//! vector is never formed.

use crate::cv::pooled_mmre;
use crate::subset::FeatureSubset;
use crate::WORST_SCORE;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RidgeError {
    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("K + aI is not positive definite (a = {0}); increase the ridge parameter")]
    Singular(f64),
    #[error("no training rows")]
    Empty,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelConfig {
    /// `exp(-||x - x'||^2 / (2 gamma^2))`
    Rbf { gamma: f64 },
    /// `x . x'`
    Linear,
}

impl KernelConfig {
    pub fn validate(&self) -> Result<(), RidgeError> {
        match *self {
            KernelConfig::Rbf { gamma } if !(gamma > 0.0) || !gamma.is_finite() => {
                Err(RidgeError::InvalidConfig(format!("RBF gamma must be positive, got {gamma}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeConfig {
    /// Ridge parameter `a >= 0`.
    pub a: f64,
    pub kernel: KernelConfig,
    /// Fit on efforts min-max scaled over the training rows and map
    /// predictions back to effort units.
    #[serde(default)]
    pub normalized_target: bool,
}

impl RidgeConfig {
    pub fn new(a: f64, kernel: KernelConfig) -> Self {
        Self {
            a,
            kernel,
            normalized_target: false,
        }
    }

    /// a = 0.1, gamma = 3.5: tuned for the wide cross-company (ISBSG-style) data.
    pub fn isbsg() -> Self {
        Self::new(0.1, KernelConfig::Rbf { gamma: 3.5 })
    }

    /// a = 0.05, gamma = 5: tuned for the Desharnais-style data.
    pub fn desharnais() -> Self {
        Self::new(0.05, KernelConfig::Rbf { gamma: 5.0 })
    }

    pub fn validate(&self) -> Result<(), RidgeError> {
        if !(self.a >= 0.0) || !self.a.is_finite() {
            return Err(RidgeError::InvalidConfig(format!("ridge parameter must be >= 0, got {}", self.a)));
        }
        self.kernel.validate()
    }
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self::isbsg()
    }
}

pub fn kernel_eval(x: &[f64], x2: &[f64], cfg: &KernelConfig) -> Result<f64, RidgeError> {
    if x.len() != x2.len() {
        return Err(RidgeError::DimensionMismatch {
            expected: x.len(),
            got: x2.len(),
        });
    }
    Ok(kernel_unchecked(x.iter().copied(), x2.iter().copied(), cfg))
}

fn kernel_unchecked<A, B>(x: A, x2: B, cfg: &KernelConfig) -> f64
where
    A: Iterator<Item = f64>,
    B: Iterator<Item = f64>,
{
    match *cfg {
        KernelConfig::Rbf { gamma } => {
            let d2: f64 = x.zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
            (-d2 / (2.0 * gamma * gamma)).exp()
        }
        KernelConfig::Linear => x.zip(x2).map(|(a, b)| a * b).sum(),
    }
}

/// Gram matrix `K[i][j] = K(a_i, b_j)` over the rows of `a` and `b`.
pub fn kernel_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>, cfg: &KernelConfig) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        kernel_unchecked(a.row(i).iter().copied(), b.row(j).iter().copied(), cfg)
    })
}

/// Symmetric training Gram matrix; the upper triangle is mirrored so
/// `K[i][j] == K[j][i]` bit for bit.
fn gram(x: &DMatrix<f64>, cfg: &KernelConfig) -> DMatrix<f64> {
    let n = x.nrows();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel_unchecked(x.row(i).iter().copied(), x.row(j).iter().copied(), cfg);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// A fitted dual-form ridge regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    x_train: DMatrix<f64>,
    z_train: DVector<f64>,
    config: RidgeConfig,
    /// `(K + aI)^{-1} z`, with `z` scaled when the target is normalized.
    dual: DVector<f64>,
    /// `(offset, scale)` mapping fitted values back to effort units.
    target_map: (f64, f64),
}

impl RidgeModel {
    /// Factorizes `K + aI` and solves for the dual coefficients.
    ///
    /// With `a = 0` the Gram matrix may be singular (a linear kernel on fewer
    /// features than rows), so the solve goes through the symmetric
    /// eigendecomposition and takes the minimum-norm solution, which
    /// reproduces least squares.
    pub fn fit(x: &DMatrix<f64>, z: &DVector<f64>, config: RidgeConfig) -> Result<Self, RidgeError> {
        config.validate()?;
        if x.nrows() == 0 {
            return Err(RidgeError::Empty);
        }
        if x.nrows() != z.len() {
            return Err(RidgeError::DimensionMismatch {
                expected: x.nrows(),
                got: z.len(),
            });
        }
        let mut k = gram(x, &config.kernel);
        for i in 0..k.nrows() {
            k[(i, i)] += config.a;
        }
        let target_map = if config.normalized_target {
            let (lo, hi) = (z.min(), z.max());
            (lo, if hi > lo { hi - lo } else { 1.0 })
        } else {
            (0.0, 1.0)
        };
        let t = z.map(|v| (v - target_map.0) / target_map.1);
        let dual = if config.a == 0.0 {
            pinv_solve(k, &t)
        } else {
            match k.cholesky() {
                Some(ch) => ch.solve(&t),
                None => return Err(RidgeError::Singular(config.a)),
            }
        };
        if dual.iter().any(|v| !v.is_finite()) {
            return Err(RidgeError::Singular(config.a));
        }
        Ok(Self {
            x_train: x.clone(),
            z_train: z.clone(),
            config,
            dual,
            target_map,
        })
    }

    pub fn predict(&self, x_new: &DMatrix<f64>) -> Result<DVector<f64>, RidgeError> {
        if x_new.ncols() != self.x_train.ncols() {
            return Err(RidgeError::DimensionMismatch {
                expected: self.x_train.ncols(),
                got: x_new.ncols(),
            });
        }
        let k = kernel_matrix(x_new, &self.x_train, &self.config.kernel);
        let (offset, scale) = self.target_map;
        Ok((k * &self.dual).map(|v| offset + scale * v))
    }

    pub fn config(&self) -> &RidgeConfig {
        &self.config
    }

    pub fn dual_coefficients(&self) -> &DVector<f64> {
        &self.dual
    }

    pub fn n_features(&self) -> usize {
        self.x_train.ncols()
    }

    pub fn training_targets(&self) -> &DVector<f64> {
        &self.z_train
    }
}

fn pinv_solve(k: DMatrix<f64>, z: &DVector<f64>) -> DVector<f64> {
    let eig = SymmetricEigen::new(k);
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // eigenvalues below this are rounding noise of an exactly singular K
    let tol = top * 1e-12;
    let mut coef = eig.eigenvectors.transpose() * z;
    for (c, &l) in coef.iter_mut().zip(eig.eigenvalues.iter()) {
        *c = if l.abs() > tol { *c / l } else { 0.0 };
    }
    eig.eigenvectors * coef
}

pub fn fit(x: &DMatrix<f64>, z: &DVector<f64>, config: RidgeConfig) -> Result<RidgeModel, RidgeError> {
    RidgeModel::fit(x, z, config)
}

pub fn predict(model: &RidgeModel, x_new: &DMatrix<f64>) -> Result<DVector<f64>, RidgeError> {
    model.predict(x_new)
}

/// Pooled k-fold MMRE of ridge regression restricted to `subset`. The empty
/// subset, and any fold whose fit fails, scores [`WORST_SCORE`].
pub fn cv_score(x: &DMatrix<f64>, z: &DVector<f64>, subset: &FeatureSubset, folds: &[usize], config: &RidgeConfig) -> f64 {
    if subset.is_empty() {
        return WORST_SCORE;
    }
    let cols = subset.indices();
    pooled_mmre(x, z, folds, &cols, |x_tr, z_tr, x_te| {
        RidgeModel::fit(x_tr, z_tr, *config).ok()?.predict(x_te).ok()
    })
}
