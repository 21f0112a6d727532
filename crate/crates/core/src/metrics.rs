//! Accuracy criteria for effort estimates: relative error, MMRE and PRED(l).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("actual effort must be positive, got {0}")]
    NonPositiveActual(f64),
    #[error("length mismatch: {actuals} actuals vs {predictions} predictions")]
    LengthMismatch { actuals: usize, predictions: usize },
    #[error("no projects to evaluate")]
    Empty,
    #[error("PRED level must be positive, got {0}")]
    InvalidLevel(f64),
}

/// How a relative error exactly at the level `l` is counted by PRED(l).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PredRule {
    /// RE <= l counts as a hit.
    Inclusive,
    /// RE < l counts as a hit.
    Strict,
}

pub const PRED_RULE: PredRule = PredRule::Inclusive;
pub const DEFAULT_PRED_LEVEL: f64 = 0.25;

/// `|actual - predicted| / actual`.
pub fn relative_error(actual: f64, predicted: f64) -> Result<f64, MetricsError> {
    if !(actual > 0.0) {
        return Err(MetricsError::NonPositiveActual(actual));
    }
    Ok((actual - predicted).abs() / actual)
}

pub fn relative_errors(actuals: &[f64], predictions: &[f64]) -> Result<Vec<f64>, MetricsError> {
    if actuals.len() != predictions.len() {
        return Err(MetricsError::LengthMismatch {
            actuals: actuals.len(),
            predictions: predictions.len(),
        });
    }
    if actuals.is_empty() {
        return Err(MetricsError::Empty);
    }
    actuals
        .iter()
        .zip(predictions)
        .map(|(&a, &p)| relative_error(a, p))
        .collect()
}

pub fn mmre(actuals: &[f64], predictions: &[f64]) -> Result<f64, MetricsError> {
    let re = relative_errors(actuals, predictions)?;
    Ok(mean(&re))
}

pub fn pred(actuals: &[f64], predictions: &[f64], level: f64) -> Result<f64, MetricsError> {
    let re = relative_errors(actuals, predictions)?;
    pred_from_errors(&re, level, PRED_RULE)
}

/// Fraction of relative errors within `level` under `rule`.
pub fn pred_from_errors(re: &[f64], level: f64, rule: PredRule) -> Result<f64, MetricsError> {
    if !(level > 0.0) {
        return Err(MetricsError::InvalidLevel(level));
    }
    if re.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hits = re
        .iter()
        .filter(|&&e| match rule {
            PredRule::Inclusive => e <= level,
            PredRule::Strict => e < level,
        })
        .count();
    Ok(hits as f64 / re.len() as f64)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Per-project errors plus their MMRE and PRED(level) summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mmre: f64,
    pub pred: f64,
    pub level: f64,
    pub re: Vec<f64>,
    pub n: usize,
}

impl EvalResult {
    pub fn evaluate(actuals: &[f64], predictions: &[f64], level: f64) -> Result<Self, MetricsError> {
        let re = relative_errors(actuals, predictions)?;
        let pred = pred_from_errors(&re, level, PRED_RULE)?;
        Ok(Self {
            mmre: mean(&re),
            pred,
            level,
            n: re.len(),
            re,
        })
    }
}
