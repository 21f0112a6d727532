//! One-hidden-layer perceptron, Garson relative importance, and the backward
//! input elimination built on top of them.
//!
//! Networks regress a target scaled to `[0, 1]` (hidden units use a sigmoid
//! of the hyperbolic family, the output is linear). Training is full-batch
//! gradient descent with momentum; a step that raises the loss is undone and
//! the learning rate halved, so the returned weights never fit worse than the
//! initial ones.

use crate::cv::pooled_mmre;
use crate::linalg::{select, select_rows};
use crate::parallel;
use crate::rng::{derive_seed, rng_from};
use crate::search::{cmp_scores, FeatureSubset, TrainingSet};
use crate::WORST_SCORE;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnError {
    #[error("training diverged at epoch {epoch} (non-finite loss); lower the learning rate")]
    Diverged { epoch: usize },
    #[error("every candidate architecture diverged")]
    AllDiverged,
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("{rows} input rows but {targets} targets")]
    Shape { rows: usize, targets: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Logistic,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Logistic => 1.0 / (1.0 + (-v).exp()),
        }
    }

    /// Derivative expressed through the activation value `h`.
    fn slope(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Logistic => h * (1.0 - h),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Minimum relative loss decrease over `window` epochs to keep going.
    pub tolerance: f64,
    pub window: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Initial weights are uniform in `±init_scale / sqrt(n_inputs)`.
    pub init_scale: f64,
    pub seed: u64,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 500,
            tolerance: 1e-6,
            window: 10,
            learning_rate: 0.1,
            momentum: 0.9,
            init_scale: 1.0,
            seed: 0,
            activation: Activation::Tanh,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), AnnError> {
        let positive = [self.tolerance, self.learning_rate, self.init_scale];
        if self.max_epochs == 0 || self.window == 0 || positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(AnnError::InvalidConfig(
                "epochs, window, tolerance, learning rate and init scale must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(AnnError::InvalidConfig("momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    /// `n_inputs x n_hidden`; column `m` holds the weights into hidden unit `m`.
    pub w_ih: DMatrix<f64>,
    pub b_h: DVector<f64>,
    pub w_ho: DVector<f64>,
    pub b_o: f64,
    pub activation: Activation,
}

impl MlpModel {
    pub fn n_inputs(&self) -> usize {
        self.w_ih.nrows()
    }

    pub fn n_hidden(&self) -> usize {
        self.w_ih.ncols()
    }

    /// Weights flattened as `w_ih` (row-major by input), `b_h`, `w_ho`, `b_o`.
    pub fn params(&self) -> Vec<f64> {
        let (ni, nh) = (self.n_inputs(), self.n_hidden());
        let mut p = Vec::with_capacity(n_params(ni, nh));
        for j in 0..ni {
            for m in 0..nh {
                p.push(self.w_ih[(j, m)]);
            }
        }
        p.extend(self.b_h.iter());
        p.extend(self.w_ho.iter());
        p.push(self.b_o);
        p
    }

    pub fn from_params(ni: usize, nh: usize, p: &[f64], activation: Activation) -> Self {
        assert_eq!(p.len(), n_params(ni, nh));
        let off = ni * nh;
        Self {
            w_ih: DMatrix::from_fn(ni, nh, |j, m| p[j * nh + m]),
            b_h: DVector::from_column_slice(&p[off..off + nh]),
            w_ho: DVector::from_column_slice(&p[off + nh..off + 2 * nh]),
            b_o: p[off + 2 * nh],
            activation,
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let net = Net::new(self.n_inputs(), self.n_hidden(), self.activation);
        let p = self.params();
        let mut h = vec![0.0; self.n_hidden()];
        DVector::from_fn(x.nrows(), |i, _| {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            net.forward(&p, &row, &mut h)
        })
    }
}

fn n_params(ni: usize, nh: usize) -> usize {
    ni * nh + 2 * nh + 1
}

struct Net {
    ni: usize,
    nh: usize,
    act: Activation,
}

impl Net {
    fn new(ni: usize, nh: usize, act: Activation) -> Self {
        Self { ni, nh, act }
    }

    fn forward(&self, p: &[f64], x: &[f64], h: &mut [f64]) -> f64 {
        let (ni, nh) = (self.ni, self.nh);
        let (w, rest) = p.split_at(ni * nh);
        let (b_h, rest) = rest.split_at(nh);
        let (w_ho, b_o) = rest.split_at(nh);
        h.copy_from_slice(b_h);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (hm, wm) in h.iter_mut().zip(&w[j * nh..(j + 1) * nh]) {
                    *hm += xj * wm;
                }
            }
        }
        let mut y = b_o[0];
        for (hm, v) in h.iter_mut().zip(w_ho) {
            *hm = self.act.apply(*hm);
            y += v * *hm;
        }
        y
    }

    /// Mean squared error over the rows and its gradient, accumulated into `g`.
    fn loss_grad(&self, p: &[f64], rows: &[Vec<f64>], t: &[f64], g: &mut [f64]) -> f64 {
        let (ni, nh) = (self.ni, self.nh);
        g.iter_mut().for_each(|v| *v = 0.0);
        let n = rows.len() as f64;
        let mut h = vec![0.0; nh];
        let mut loss = 0.0;
        let w_ho = &p[ni * nh + nh..ni * nh + 2 * nh];
        for (x, &ti) in rows.iter().zip(t) {
            let e = self.forward(p, x, &mut h) - ti;
            loss += e * e;
            let d = 2.0 * e / n;
            let (gw, rest) = g.split_at_mut(ni * nh);
            let (gbh, rest) = rest.split_at_mut(nh);
            let (gwho, gbo) = rest.split_at_mut(nh);
            gbo[0] += d;
            for m in 0..nh {
                gwho[m] += d * h[m];
                let dh = d * w_ho[m] * self.act.slope(h[m]);
                gbh[m] += dh;
                for (j, &xj) in x.iter().enumerate() {
                    gw[j * nh + m] += dh * xj;
                }
            }
        }
        loss / n
    }
}

fn rows_of(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect()
}

/// Training-set MSE of `model` and its gradient in [`MlpModel::params`] order.
pub fn loss_and_gradient(model: &MlpModel, x: &DMatrix<f64>, t: &DVector<f64>) -> (f64, Vec<f64>) {
    let net = Net::new(model.n_inputs(), model.n_hidden(), model.activation);
    let p = model.params();
    let mut g = vec![0.0; p.len()];
    let loss = net.loss_grad(&p, &rows_of(x), t.as_slice(), &mut g);
    (loss, g)
}

/// Random initial network for `ni` inputs and `nh` hidden units.
pub fn init_model(ni: usize, nh: usize, cfg: &TrainConfig) -> MlpModel {
    let s = cfg.init_scale / (ni.max(1) as f64).sqrt();
    let mut rng = rng_from(cfg.seed);
    let p: Vec<f64> = (0..n_params(ni, nh)).map(|_| rng.gen_range(-s..=s)).collect();
    MlpModel::from_params(ni, nh, &p, cfg.activation)
}

/// Fits a network to targets already scaled to `[0, 1]`.
pub fn mlp_train(x: &DMatrix<f64>, t: &DVector<f64>, hidden: usize, cfg: &TrainConfig) -> Result<MlpModel, AnnError> {
    cfg.validate()?;
    if hidden == 0 {
        return Err(AnnError::InvalidConfig("at least one hidden unit is required".into()));
    }
    if x.nrows() != t.len() || t.is_empty() {
        return Err(AnnError::Shape {
            rows: x.nrows(),
            targets: t.len(),
        });
    }
    let (ni, nh) = (x.ncols(), hidden);
    let net = Net::new(ni, nh, cfg.activation);
    let rows = rows_of(x);
    let t = t.as_slice();

    let mut p = init_model(ni, nh, cfg).params();
    let mut g = vec![0.0; p.len()];
    let mut v = vec![0.0; p.len()];
    let mut lr = cfg.learning_rate;
    let mut loss = net.loss_grad(&p, &rows, t, &mut g);
    if !loss.is_finite() {
        return Err(AnnError::Diverged { epoch: 0 });
    }
    let mut best = (loss, p.clone(), g.clone());
    let mut history = vec![loss];

    for epoch in 1..=cfg.max_epochs {
        for ((pi, vi), gi) in p.iter_mut().zip(v.iter_mut()).zip(&best.2) {
            *vi = cfg.momentum * *vi - lr * gi;
            *pi += *vi;
        }
        loss = net.loss_grad(&p, &rows, t, &mut g);
        if !loss.is_finite() {
            return Err(AnnError::Diverged { epoch });
        }
        if loss < best.0 {
            best = (loss, p.clone(), g.clone());
        } else {
            // overshoot: back to the best point with a smaller step
            lr *= 0.5;
            v.iter_mut().for_each(|x| *x = 0.0);
            p.clone_from(&best.1);
        }
        history.push(best.0);
        if best.0 <= f64::EPSILON || lr < 1e-12 * cfg.learning_rate {
            break;
        }
        if epoch >= cfg.window {
            let past = history[epoch - cfg.window];
            if (past - best.0) / past < cfg.tolerance {
                break;
            }
        }
    }
    Ok(MlpModel::from_params(ni, nh, &best.1, cfg.activation))
}

/// Min-max target scaling used around the networks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScale {
    pub min: f64,
    pub range: f64,
}

impl TargetScale {
    pub fn fit(z: &DVector<f64>) -> Self {
        let min = z.min();
        let range = z.max() - min;
        Self {
            min,
            range: if range > 0.0 { range } else { 1.0 },
        }
    }

    pub fn scale(&self, z: &DVector<f64>) -> DVector<f64> {
        z.map(|v| (v - self.min) / self.range)
    }

    pub fn unscale(&self, t: &DVector<f64>) -> DVector<f64> {
        t.map(|v| self.min + v * self.range)
    }
}

/// A network together with the scaling of the effort it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortNet {
    pub model: MlpModel,
    pub scale: TargetScale,
}

impl EffortNet {
    pub fn train(x: &DMatrix<f64>, z: &DVector<f64>, hidden: usize, cfg: &TrainConfig) -> Result<Self, AnnError> {
        let scale = TargetScale::fit(z);
        let model = mlp_train(x, &scale.scale(z), hidden, cfg)?;
        Ok(Self { model, scale })
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        self.scale.unscale(&self.model.predict(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// First hidden-layer size; `None` starts at the number of inputs.
    pub min_hidden: Option<usize>,
    pub max_hidden: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            min_hidden: None,
            max_hidden: 16,
        }
    }
}

impl SweepConfig {
    /// Hidden-layer sizes tried for `ni` inputs.
    pub fn candidates(&self, ni: usize) -> Vec<usize> {
        let start = self.min_hidden.unwrap_or(ni).clamp(1, self.max_hidden.max(1));
        (start..=self.max_hidden.max(1)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub net: EffortNet,
    pub hidden: usize,
    pub cv_mmre: f64,
    /// `(hidden units, fold-validation MMRE)` for every candidate.
    pub candidates: Vec<(usize, f64)>,
}

/// Scores every candidate architecture by pooled fold-validation MMRE on
/// the effort scale, then retrains the winner on all rows.
pub fn architecture_sweep(
    data: &TrainingSet,
    cols: &[usize],
    sweep: &SweepConfig,
    cfg: &TrainConfig,
) -> Result<SweepResult, AnnError> {
    cfg.validate()?;
    let sizes = sweep.candidates(cols.len());
    let scores = parallel::map(&sizes, |&nh| {
        let c = TrainConfig {
            seed: derive_seed(cfg.seed, &[nh as u64]),
            ..*cfg
        };
        pooled_mmre(data.x(), data.z(), data.folds(), cols, |xt, zt, xv| {
            EffortNet::train(xt, zt, nh, &c).ok().map(|n| n.predict(xv))
        })
    });
    let mut best = 0;
    for k in 1..sizes.len() {
        if cmp_scores(scores[k], scores[best]) == Ordering::Less {
            best = k;
        }
    }
    if scores[best] == WORST_SCORE {
        return Err(AnnError::AllDiverged);
    }
    let hidden = sizes[best];
    let c = TrainConfig {
        seed: derive_seed(cfg.seed, &[hidden as u64]),
        ..*cfg
    };
    let rows: Vec<usize> = (0..data.z().len()).collect();
    let net = EffortNet::train(&select(data.x(), &rows, cols), &select_rows(data.z(), &rows), hidden, &c)?;
    Ok(SweepResult {
        net,
        hidden,
        cv_mmre: scores[best],
        candidates: sizes.into_iter().zip(scores).collect(),
    })
}

/// Garson's relative importance of each input. Each hidden unit splits its
/// absolute output weight among inputs in proportion to their absolute
/// incoming weights; the shares are summed and normalized to one. Hidden
/// units with no incoming weight contribute nothing; an all-zero network
/// yields all zeros.
pub fn garson_importance(model: &MlpModel) -> Vec<f64> {
    let (ni, nh) = (model.n_inputs(), model.n_hidden());
    let mut c = vec![0.0; ni];
    for m in 0..nh {
        let col = model.w_ih.column(m);
        let denom: f64 = col.iter().map(|w| w.abs()).sum();
        if denom == 0.0 {
            continue;
        }
        let out = model.w_ho[m].abs();
        for (cj, w) in c.iter_mut().zip(col.iter()) {
            *cj += w.abs() / denom * out;
        }
    }
    let total: f64 = c.iter().sum();
    if total > 0.0 {
        c.iter_mut().for_each(|v| *v /= total);
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GarsonConfig {
    pub train: TrainConfig,
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GarsonRound {
    pub active: FeatureSubset,
    pub hidden: usize,
    pub cv_mmre: f64,
    pub importance: Vec<f64>,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GarsonResult {
    pub subset: FeatureSubset,
    pub rounds: Vec<GarsonRound>,
}

/// Drops the least important input one at a time, re-running the
/// architecture sweep after every drop, until half the inputs (rounded up)
/// remain.
pub fn garson_eliminate(data: &TrainingSet, cfg: &GarsonConfig) -> Result<GarsonResult, AnnError> {
    let d = data.n_features();
    let target = d.div_ceil(2);
    let mut active = FeatureSubset::full(d);
    let mut rounds = Vec::new();
    while active.count() > target {
        let cols = active.indices();
        let round_cfg = TrainConfig {
            seed: derive_seed(cfg.train.seed, &[rounds.len() as u64]),
            ..cfg.train
        };
        let sweep = architecture_sweep(data, &cols, &cfg.sweep, &round_cfg)?;
        let ri = garson_importance(&sweep.net.model);
        let mut low = 0;
        for k in 1..ri.len() {
            if ri[k] < ri[low] {
                low = k;
            }
        }
        let dropped = cols[low];
        rounds.push(GarsonRound {
            active: active.clone(),
            hidden: sweep.hidden,
            cv_mmre: sweep.cv_mmre,
            importance: ri,
            dropped,
        });
        active.remove(dropped);
    }
    Ok(GarsonResult { subset: active, rounds })
}
