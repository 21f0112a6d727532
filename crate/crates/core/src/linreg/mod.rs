//! Least squares on feature subsets and stepwise selection driven by
//! partial F-test p-values.

pub mod fdist;
mod ols;

pub use ols::{ls_fit, ls_fit_all, LinearModel};

use crate::cv::pooled_mmre;
use crate::parallel;
use crate::subset::FeatureSubset;
use crate::WORST_SCORE;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinregError {
    #[error("stepwise did not settle within {0} steps (add/remove cycle?)")]
    MaxSteps(usize),
    #[error("invalid stepwise configuration: {0}")]
    InvalidConfig(String),
    #[error("{rows} rows but {targets} targets")]
    DimensionMismatch { rows: usize, targets: usize },
}

/// Relative size below which a sum of squares is treated as exactly zero.
const SS_TOL: f64 = 1e-12;

/// p-value of the partial F-test for `candidate` against the model on
/// `current`.
///
/// If `candidate` is outside `current` this tests adding it; if inside, it
/// tests removing it. The null hypothesis is a zero coefficient. Degenerate
/// cases return 1: a candidate that adds no rank (constant, or a copy of an
/// active column), no residual degrees of freedom, or no reduction in SSE.
/// A candidate that drives the residual to exactly zero returns 0.
pub fn partial_f_pvalue(x: &DMatrix<f64>, z: &DVector<f64>, current: &FeatureSubset, candidate: usize) -> f64 {
    let (full, reduced) = if current.contains(candidate) {
        (current.clone(), current.without(candidate))
    } else {
        (current.with(candidate), current.clone())
    };
    let big = ls_fit(x, z, &full);
    let small = ls_fit(x, z, &reduced);
    let df_num = big.rank.saturating_sub(small.rank);
    if df_num == 0 {
        return 1.0;
    }
    let n = x.nrows() as f64;
    let df_den = n - big.rank as f64 - 1.0;
    if df_den <= 0.0 {
        return 1.0;
    }
    let mean = z.mean();
    let sst: f64 = z.iter().map(|v| (v - mean) * (v - mean)).sum();
    let scale = SS_TOL * sst.max(f64::MIN_POSITIVE);
    let reduction = (small.sse - big.sse).max(0.0);
    if reduction <= scale {
        return 1.0;
    }
    if big.sse <= scale {
        return 0.0;
    }
    let f = (reduction / df_num as f64) / (big.sse / df_den);
    fdist::f_sf(f, df_num as f64, df_den).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepwiseConfig {
    #[serde(default = "default_p_enter")]
    pub p_enter: f64,
    #[serde(default = "default_p_remove")]
    pub p_remove: f64,
    #[serde(default = "default_direction")]
    pub direction: Direction,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_p_enter() -> f64 {
    0.05
}
fn default_p_remove() -> f64 {
    0.10
}
fn default_direction() -> Direction {
    Direction::Forward
}
fn default_max_steps() -> usize {
    1000
}

impl Default for StepwiseConfig {
    fn default() -> Self {
        Self {
            p_enter: default_p_enter(),
            p_remove: default_p_remove(),
            direction: default_direction(),
            max_steps: default_max_steps(),
        }
    }
}

impl StepwiseConfig {
    pub fn forward() -> Self {
        Self::default()
    }

    pub fn backward() -> Self {
        Self {
            direction: Direction::Backward,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), LinregError> {
        if !(0.0 < self.p_enter && self.p_enter < self.p_remove && self.p_remove < 1.0) {
            return Err(LinregError::InvalidConfig(format!(
                "need 0 < p_enter < p_remove < 1, got {} and {}",
                self.p_enter, self.p_remove
            )));
        }
        if self.max_steps == 0 {
            return Err(LinregError::InvalidConfig("max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Step {
    Add { feature: usize, p: f64 },
    Remove { feature: usize, p: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepwiseResult {
    pub subset: FeatureSubset,
    pub steps: Vec<Step>,
}

/// Stepwise regression.
///
/// Starting from the empty set (forward) or all columns (backward), repeat:
/// add the outside column with the smallest entry p-value if it is below
/// `p_enter`; otherwise remove the inside column with the largest p-value if
/// it is above `p_remove`; otherwise stop. Ties go to the lowest index.
pub fn stepwise(x: &DMatrix<f64>, z: &DVector<f64>, cfg: &StepwiseConfig) -> Result<StepwiseResult, LinregError> {
    cfg.validate()?;
    if x.nrows() != z.len() {
        return Err(LinregError::DimensionMismatch {
            rows: x.nrows(),
            targets: z.len(),
        });
    }
    let d = x.ncols();
    let mut subset = match cfg.direction {
        Direction::Forward => FeatureSubset::empty(d),
        Direction::Backward => FeatureSubset::full(d),
    };
    let mut steps = Vec::new();
    loop {
        if steps.len() >= cfg.max_steps {
            return Err(LinregError::MaxSteps(cfg.max_steps));
        }
        let outside: Vec<usize> = (0..d).filter(|&j| !subset.contains(j)).collect();
        let p_out = parallel::map(&outside, |&j| partial_f_pvalue(x, z, &subset, j));
        if let Some((j, p)) = pick(&outside, &p_out, |a, b| a < b) {
            if p < cfg.p_enter {
                subset.insert(j);
                steps.push(Step::Add { feature: j, p });
                continue;
            }
        }
        let inside = subset.indices();
        let p_in = parallel::map(&inside, |&j| partial_f_pvalue(x, z, &subset, j));
        if let Some((j, p)) = pick(&inside, &p_in, |a, b| a > b) {
            if p > cfg.p_remove {
                subset.remove(j);
                steps.push(Step::Remove { feature: j, p });
                continue;
            }
        }
        break;
    }
    Ok(StepwiseResult { subset, steps })
}

/// First index whose p-value beats all others under `better` (strict, so the
/// lowest index wins ties).
fn pick(idx: &[usize], p: &[f64], better: impl Fn(f64, f64) -> bool) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (&j, &pj) in idx.iter().zip(p) {
        match best {
            Some((_, pb)) if !better(pj, pb) => {}
            _ => best = Some((j, pj)),
        }
    }
    best
}

/// Pooled k-fold MMRE of least squares restricted to `subset`.
pub fn ls_cv_score(x: &DMatrix<f64>, z: &DVector<f64>, subset: &FeatureSubset, folds: &[usize]) -> f64 {
    if subset.is_empty() {
        return WORST_SCORE;
    }
    pooled_mmre(x, z, folds, &subset.indices(), |x_tr, z_tr, x_te| {
        Some(ls_fit_all(x_tr, z_tr).predict_selected(x_te))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use rand::Rng;

    fn noise(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rng_from(seed);
        DMatrix::from_fn(n, d, |_, _| rng.gen::<f64>())
    }

    #[test]
    fn copy_of_active_column_has_p_one() {
        let mut x = noise(30, 3, 1);
        for i in 0..30 {
            x[(i, 2)] = x[(i, 0)];
        }
        let z = DVector::from_fn(30, |i, _| 3.0 * x[(i, 0)] + x[(i, 1)]);
        let cur = FeatureSubset::from_indices(3, &[0]);
        assert_eq!(partial_f_pvalue(&x, &z, &cur, 2), 1.0);
    }

    #[test]
    fn exact_target_has_tiny_p() {
        let x = noise(12, 2, 2);
        let z = DVector::from_fn(12, |i, _| x[(i, 1)]);
        let p = partial_f_pvalue(&x, &z, &FeatureSubset::empty(2), 1);
        assert!(p < 1e-6, "{p}");
    }

    #[test]
    fn strong_but_noisy_signal_matches_reference_distribution() {
        use statrs::distribution::{ContinuousCDF, FisherSnedecor};
        let x = noise(40, 2, 3);
        let mut rng = rng_from(33);
        let z = DVector::from_fn(40, |i, _| 2.0 * x[(i, 0)] + 0.3 * rng.gen::<f64>());
        let p = partial_f_pvalue(&x, &z, &FeatureSubset::empty(2), 0);
        // independent route: F from explicit SSEs, tail from statrs
        let sse0: f64 = {
            let m = z.mean();
            z.iter().map(|v| (v - m).powi(2)).sum()
        };
        let m1 = ls_fit(&x, &z, &FeatureSubset::from_indices(2, &[0]));
        let f = (sse0 - m1.sse) / (m1.sse / 38.0);
        let reference = FisherSnedecor::new(1.0, 38.0).unwrap().sf(f);
        assert!((p - reference).abs() < 1e-10);
    }

    #[test]
    fn noise_candidate_rarely_significant() {
        let mut significant = 0;
        for seed in 0..200 {
            let x = noise(200, 1, 1000 + seed);
            let mut rng = rng_from(5000 + seed);
            let z = DVector::from_fn(200, |_, _| rng.gen::<f64>());
            let p = partial_f_pvalue(&x, &z, &FeatureSubset::empty(1), 0);
            assert!((0.0..=1.0).contains(&p));
            if p < 0.05 {
                significant += 1;
            }
        }
        // ~Binomial(200, 0.05): mean 10, sd ~3.1
        assert!(significant <= 25, "{significant} of 200 significant");
    }

    #[test]
    fn forward_finds_single_driver() {
        for seed in 0..5 {
            let x = noise(40, 7, seed);
            let z = DVector::from_fn(40, |i, _| 5.0 * x[(i, 3)]);
            let r = stepwise(&x, &z, &StepwiseConfig::forward()).unwrap();
            assert_eq!(r.subset.indices(), vec![3]);
            // exhaustive check: x3 alone minimizes SSE among singletons
            let best = (0..7)
                .min_by(|&a, &b| {
                    let sa = ls_fit(&x, &z, &FeatureSubset::from_indices(7, &[a])).sse;
                    let sb = ls_fit(&x, &z, &FeatureSubset::from_indices(7, &[b])).sse;
                    sa.total_cmp(&sb)
                })
                .unwrap();
            assert_eq!(best, 3);
        }
    }

    #[test]
    fn backward_drops_one_duplicate_first() {
        let mut x = noise(40, 5, 9);
        for i in 0..40 {
            x[(i, 4)] = x[(i, 1)];
        }
        let mut rng = rng_from(99);
        let z = DVector::from_fn(40, |i, _| 1.0 + 2.0 * x[(i, 0)] + 3.0 * x[(i, 1)] + 0.1 * rng.gen::<f64>());
        let r = stepwise(&x, &z, &StepwiseConfig::backward()).unwrap();
        match r.steps.first() {
            Some(Step::Remove { feature, p }) => {
                assert_eq!(*feature, 1);
                assert_eq!(*p, 1.0);
            }
            other => panic!("unexpected first step {other:?}"),
        }
        let removed: Vec<usize> = r
            .steps
            .iter()
            .filter_map(|s| match s {
                Step::Remove { feature, .. } if *feature == 1 || *feature == 4 => Some(*feature),
                _ => None,
            })
            .collect();
        assert_eq!(removed, vec![1]);
        assert!(r.subset.contains(4));
    }

    #[test]
    fn pure_noise_selects_little() {
        let mut total = 0;
        for seed in 0..20 {
            let x = noise(60, 6, 200 + seed);
            let mut rng = rng_from(300 + seed);
            let z = DVector::from_fn(60, |_, _| rng.gen::<f64>());
            total += stepwise(&x, &z, &StepwiseConfig::forward()).unwrap().subset.count();
        }
        assert!(total <= 15, "{total} noise features selected over 20 runs");
    }

    #[test]
    fn config_validation() {
        let bad = StepwiseConfig {
            p_enter: 0.2,
            p_remove: 0.1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(StepwiseConfig::default().validate().is_ok());
    }

    #[test]
    fn forward_adds_never_increase_sse() {
        let x = noise(50, 6, 77);
        let mut rng = rng_from(78);
        let z = DVector::from_fn(50, |i, _| x[(i, 0)] + 2.0 * x[(i, 2)] - x[(i, 5)] + 0.2 * rng.gen::<f64>());
        let r = stepwise(&x, &z, &StepwiseConfig::forward()).unwrap();
        let mut s = FeatureSubset::empty(6);
        let mut last = ls_fit(&x, &z, &s).sse;
        for step in &r.steps {
            if let Step::Add { feature, .. } = step {
                s.insert(*feature);
                let sse = ls_fit(&x, &z, &s).sse;
                assert!(sse <= last + 1e-12);
                last = sse;
            }
        }
    }
}
