//! Experiment protocol: random 80/20 partitions, feature selection on the
//! training rows, ridge scoring of full and selected feature sets, and the
//! per-method summaries built from those cells.

use crate::ann::{garson_eliminate, GarsonConfig};
use crate::dataset::{make_splits, Dataset, DatasetError, FeatureDescriptor, SplitPlan};
use crate::linalg::{select, select_rows};
use crate::linreg::{stepwise, Direction, StepwiseConfig};
use crate::metrics::{EvalResult, DEFAULT_PRED_LEVEL};
use crate::parallel;
use crate::ridge::{RidgeConfig, RidgeModel};
use crate::rng::derive_seed;
use crate::search::{
    backward_eliminate, forward_select, ga_select, Evaluator, GaConfig, LsFilter, RidgeWrapper, TrainingSet,
};
use crate::subset::FeatureSubset;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use thiserror::Error;

pub use crate::search::{exhaustive_oracle, OracleError, ORACLE_MAX_FEATURES};

pub const REPORT_FORMAT: &str = "fss-report/1";

/// Fraction of partitions a feature must appear in to count as consistent
/// at the lower threshold.
pub const CONSISTENCY_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MethodId {
    Bfe,
    Ffs,
    Bswf,
    Fswf,
    Lsbfe,
    Lsffs,
    Garson,
    Lsga,
    Ga,
}

impl MethodId {
    pub const ALL: [MethodId; 9] = [
        MethodId::Bfe,
        MethodId::Ffs,
        MethodId::Bswf,
        MethodId::Fswf,
        MethodId::Lsbfe,
        MethodId::Lsffs,
        MethodId::Garson,
        MethodId::Lsga,
        MethodId::Ga,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::Bfe => "BFE",
            MethodId::Ffs => "FFS",
            MethodId::Bswf => "BSWF",
            MethodId::Fswf => "FSWF",
            MethodId::Lsbfe => "LSBFE",
            MethodId::Lsffs => "LSFFS",
            MethodId::Garson => "GARSON",
            MethodId::Lsga => "LSGA",
            MethodId::Ga => "GA",
        }
    }

    /// Wrappers score subsets with the ridge estimator itself.
    pub fn is_wrapper(self) -> bool {
        matches!(self, MethodId::Bfe | MethodId::Ffs | MethodId::Ga)
    }

    fn index(self) -> u64 {
        MethodId::ALL.iter().position(|&m| m == self).unwrap() as u64
    }

    pub fn valid_ids() -> String {
        MethodId::ALL.map(|m| m.as_str()).join(", ")
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown method {0:?}; valid methods are {ids}", ids = MethodId::valid_ids())]
pub struct UnknownMethod(pub String);

impl FromStr for MethodId {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownMethod(s.to_owned()))
    }
}

/// Stepwise thresholds shared by BSWF and FSWF; the direction comes from
/// the method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepwiseThresholds {
    pub p_enter: f64,
    pub p_remove: f64,
    pub max_steps: usize,
}

impl Default for StepwiseThresholds {
    fn default() -> Self {
        let d = StepwiseConfig::default();
        Self {
            p_enter: d.p_enter,
            p_remove: d.p_remove,
            max_steps: d.max_steps,
        }
    }
}

impl StepwiseThresholds {
    pub fn config(&self, direction: Direction) -> StepwiseConfig {
        StepwiseConfig {
            p_enter: self.p_enter,
            p_remove: self.p_remove,
            direction,
            max_steps: self.max_steps,
        }
    }
}

/// Settings for every method. Seeds inside `ga` and `ann` are replaced by
/// per-cell seeds derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MethodConfigs {
    pub ridge: RidgeConfig,
    pub stepwise: StepwiseThresholds,
    pub ga: GaConfig,
    pub ann: GarsonConfig,
    pub pred_level: f64,
}

impl Default for MethodConfigs {
    fn default() -> Self {
        Self {
            ridge: RidgeConfig::default(),
            stepwise: StepwiseThresholds::default(),
            ga: GaConfig::default(),
            ann: GarsonConfig::default(),
            pred_level: DEFAULT_PRED_LEVEL,
        }
    }
}

impl MethodConfigs {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |e: String| HarnessError::InvalidConfig(e);
        self.ridge.validate().map_err(|e| bad(e.to_string()))?;
        self.stepwise
            .config(Direction::Forward)
            .validate()
            .map_err(|e| bad(e.to_string()))?;
        self.ga.validate().map_err(|e| bad(e.to_string()))?;
        self.ann.train.validate().map_err(|e| bad(e.to_string()))?;
        if self.ann.sweep.max_hidden == 0 {
            return Err(bad("ann.sweep.max_hidden must be positive".into()));
        }
        if !(self.pred_level > 0.0) || !self.pred_level.is_finite() {
            return Err(bad(format!("pred_level must be positive, got {}", self.pred_level)));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{method} on partition {partition}: {message}")]
    Cell {
        method: MethodId,
        partition: usize,
        message: String,
    },
    #[error("malformed report: {0}")]
    Report(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub mmre: f64,
    pub pred: f64,
}

impl From<&EvalResult> for Scores {
    fn from(r: &EvalResult) -> Self {
        Self {
            mmre: r.mmre,
            pred: r.pred,
        }
    }
}

/// One (method, partition) cell. "initial" scores use every feature,
/// "final" scores the selected ones; both come from the same ridge settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionResult {
    pub method: MethodId,
    pub partition_id: usize,
    /// Feature ids (column index + 1) of the selected subset, ascending.
    pub selected: Vec<usize>,
    pub n_selected: usize,
    pub train_initial: Scores,
    pub train_final: Scores,
    pub test_initial: Scores,
    pub test_final: Scores,
    /// Evaluator score of the selected subset, for the search-based methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_score: Option<f64>,
}

impl PartitionResult {
    pub fn subset(&self, n_features: usize) -> FeatureSubset {
        let cols: Vec<usize> = self.selected.iter().map(|id| id - 1).collect();
        FeatureSubset::from_indices(n_features, &cols)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub method: MethodId,
    pub partition_id: usize,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = (values.iter().sum::<f64>() / values.len() as f64).clamp(min, max);
        Some(Self { min, mean, max })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreStats {
    pub mmre: Stat,
    pub pred: Stat,
}

/// Min / mean / max of each score over a method's completed partitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: MethodId,
    pub partitions: usize,
    pub train_initial: ScoreStats,
    pub train_final: ScoreStats,
    pub test_initial: ScoreStats,
    pub test_final: ScoreStats,
    pub n_selected: Stat,
}

impl MethodAggregate {
    pub fn from_rows(method: MethodId, rows: &[&PartitionResult]) -> Option<Self> {
        let stats = |f: &dyn Fn(&PartitionResult) -> Scores| -> Option<ScoreStats> {
            let s: Vec<Scores> = rows.iter().map(|r| f(r)).collect();
            Some(ScoreStats {
                mmre: Stat::of(&s.iter().map(|v| v.mmre).collect::<Vec<_>>())?,
                pred: Stat::of(&s.iter().map(|v| v.pred).collect::<Vec<_>>())?,
            })
        };
        Some(Self {
            method,
            partitions: rows.len(),
            train_initial: stats(&|r| r.train_initial)?,
            train_final: stats(&|r| r.train_final)?,
            test_initial: stats(&|r| r.test_initial)?,
            test_final: stats(&|r| r.test_final)?,
            n_selected: Stat::of(&rows.iter().map(|r| r.n_selected as f64).collect::<Vec<_>>())?,
        })
    }
}

/// Feature ids selected in every partition and in at least
/// `threshold` partitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consistency {
    pub method: MethodId,
    pub all: Vec<usize>,
    pub threshold: usize,
    pub at_threshold: Vec<usize>,
    /// `(feature id, partitions selecting it)` for every feature selected at least once.
    pub counts: Vec<(usize, usize)>,
}

impl Consistency {
    pub fn from_rows(method: MethodId, rows: &[&PartitionResult], n_partitions: usize, n_features: usize) -> Self {
        let mut count = vec![0usize; n_features + 1];
        for r in rows {
            for &id in &r.selected {
                count[id] += 1;
            }
        }
        let threshold = consistency_threshold(n_partitions);
        let ids = |min: usize| (1..=n_features).filter(|&id| count[id] >= min).collect::<Vec<_>>();
        Self {
            method,
            all: ids(n_partitions),
            threshold,
            at_threshold: ids(threshold),
            counts: (1..=n_features).filter(|&id| count[id] > 0).map(|id| (id, count[id])).collect(),
        }
    }
}

/// `ceil(0.8 n)`, computed in integers.
pub fn consistency_threshold(n_partitions: usize) -> usize {
    (4 * n_partitions).div_ceil(5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRef {
    pub id: usize,
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub partition_id: usize,
    pub seed: u64,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportProvenance {
    /// SHA-256 of the canonical dataset content (features, matrix, effort).
    pub dataset_sha256: String,
    pub n_projects: usize,
    pub master_seed: u64,
    pub n_partitions: usize,
    pub methods: Vec<MethodId>,
    pub configs: MethodConfigs,
    pub splits: Vec<SplitRecord>,
}

/// Full experiment output, persisted as JSON:
///
/// ```json
/// { "format": "fss-report/1",
///   "features": [{ "id": 1, "code": "TE" }, ...],
///   "results": [{ "method": "GA", "partition_id": 0, "selected": [3, 8], ... }],
///   "failures": [],
///   "aggregates": [{ "method": "GA", "test_final": { "mmre": { "min": .., "mean": .., "max": .. } } }],
///   "consistency": [{ "method": "GA", "all": [8], "threshold": 8, "at_threshold": [3, 8] }],
///   "provenance": { "dataset_sha256": "...", "master_seed": 1, ... } }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format: String,
    pub features: Vec<FeatureRef>,
    pub results: Vec<PartitionResult>,
    pub failures: Vec<CellFailure>,
    pub aggregates: Vec<MethodAggregate>,
    pub consistency: Vec<Consistency>,
    pub provenance: ReportProvenance,
}

impl ExperimentReport {
    pub fn rows_for(&self, method: MethodId) -> Vec<&PartitionResult> {
        self.results.iter().filter(|r| r.method == method).collect()
    }

    pub fn aggregate(&self, method: MethodId) -> Option<&MethodAggregate> {
        self.aggregates.iter().find(|a| a.method == method)
    }

    pub fn consistency_for(&self, method: MethodId) -> Option<&Consistency> {
        self.consistency.iter().find(|c| c.method == method)
    }

    pub fn code_of(&self, id: usize) -> Option<&str> {
        self.features.iter().find(|f| f.id == id).map(|f| f.code.as_str())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let r: Self = serde_json::from_str(text).map_err(|e| HarnessError::Report(e.to_string()))?;
        if r.format != REPORT_FORMAT {
            return Err(HarnessError::Report(format!("unsupported format {:?}", r.format)));
        }
        Ok(r)
    }

    /// One row per completed cell.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), HarnessError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "method",
            "partition",
            "n_selected",
            "selected",
            "train_initial_mmre",
            "train_initial_pred",
            "train_final_mmre",
            "train_final_pred",
            "test_initial_mmre",
            "test_initial_pred",
            "test_final_mmre",
            "test_final_pred",
            "search_score",
        ])?;
        for r in &self.results {
            let ids: Vec<String> = r.selected.iter().map(|i| i.to_string()).collect();
            let mut rec = vec![
                r.method.to_string(),
                r.partition_id.to_string(),
                r.n_selected.to_string(),
                ids.join(" "),
            ];
            for s in [r.train_initial, r.train_final, r.test_initial, r.test_final] {
                rec.push(s.mmre.to_string());
                rec.push(s.pred.to_string());
            }
            rec.push(r.search_score.map(|v| v.to_string()).unwrap_or_default());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// SHA-256 over the canonical JSON of the dataset's features, matrix and effort.
pub fn dataset_digest(ds: &Dataset) -> String {
    #[derive(Serialize)]
    struct Canon<'a> {
        features: &'a [FeatureDescriptor],
        rows: Vec<Vec<f64>>,
        effort: Vec<f64>,
    }
    let canon = Canon {
        features: ds.features(),
        rows: ds.x().row_iter().map(|r| r.iter().copied().collect()).collect(),
        effort: ds.z().iter().copied().collect(),
    };
    hex::encode(Sha256::digest(serde_json::to_vec(&canon).expect("dataset serializes")))
}

/// Seed for one (method, partition) cell.
pub fn cell_seed(master_seed: u64, method: MethodId, partition_id: usize) -> u64 {
    derive_seed(master_seed, &[method.index(), partition_id as u64])
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Runs one method's selection on the plan's training rows and scores ridge
/// fits with all features and with the selected ones.
pub fn run_method(
    ds: &Dataset,
    plan: &SplitPlan,
    method: MethodId,
    configs: &MethodConfigs,
    master_seed: u64,
) -> Result<PartitionResult, HarnessError> {
    let fail = |message: String| HarnessError::Cell {
        method,
        partition: plan.partition_id,
        message,
    };
    let d = ds.n_features();
    let all_cols: Vec<usize> = (0..d).collect();
    let x_tr = select(ds.x(), &plan.train, &all_cols);
    let z_tr = select_rows(ds.z(), &plan.train);
    let data = TrainingSet::new(x_tr.clone(), z_tr.clone(), plan.folds.clone()).map_err(|e| fail(e.to_string()))?;
    let seed = cell_seed(master_seed, method, plan.partition_id);
    let ridge_eval = RidgeWrapper(configs.ridge);
    let ls_eval = LsFilter;

    let (selected, search_score) = match method {
        MethodId::Bfe | MethodId::Lsbfe | MethodId::Ffs | MethodId::Lsffs => {
            let eval: &dyn Evaluator = if method.is_wrapper() { &ridge_eval } else { &ls_eval };
            let r = if matches!(method, MethodId::Bfe | MethodId::Lsbfe) {
                backward_eliminate(&data, eval)
            } else {
                forward_select(&data, eval)
            };
            (r.subset, finite(r.score))
        }
        MethodId::Ga | MethodId::Lsga => {
            let eval: &dyn Evaluator = if method.is_wrapper() { &ridge_eval } else { &ls_eval };
            let cfg = GaConfig { seed, ..configs.ga };
            let r = ga_select(&data, eval, &cfg).map_err(|e| fail(e.to_string()))?;
            (r.subset, finite(r.score))
        }
        MethodId::Bswf | MethodId::Fswf => {
            let dir = if method == MethodId::Bswf {
                Direction::Backward
            } else {
                Direction::Forward
            };
            let r = stepwise(&x_tr, &z_tr, &configs.stepwise.config(dir)).map_err(|e| fail(e.to_string()))?;
            (r.subset, None)
        }
        MethodId::Garson => {
            let mut cfg = configs.ann;
            cfg.train.seed = seed;
            let r = garson_eliminate(&data, &cfg).map_err(|e| fail(e.to_string()))?;
            (r.subset, None)
        }
    };

    let score = |cols: &[usize]| -> Result<(Scores, Scores), HarnessError> {
        let model = RidgeModel::fit(&select(ds.x(), &plan.train, cols), &z_tr, configs.ridge)
            .map_err(|e| fail(e.to_string()))?;
        let eval = |rows: &[usize]| -> Result<Scores, HarnessError> {
            let pred = model
                .predict(&select(ds.x(), rows, cols))
                .map_err(|e| fail(e.to_string()))?;
            let actual = select_rows(ds.z(), rows);
            let r = EvalResult::evaluate(actual.as_slice(), pred.as_slice(), configs.pred_level)
                .map_err(|e| fail(e.to_string()))?;
            Ok(Scores::from(&r))
        };
        Ok((eval(&plan.train)?, eval(&plan.test)?))
    };
    let cols = selected.indices();
    let (train_initial, test_initial) = score(&all_cols)?;
    let (train_final, test_final) = score(&cols)?;
    Ok(PartitionResult {
        method,
        partition_id: plan.partition_id,
        selected: ds.ids_of(&cols),
        n_selected: cols.len(),
        train_initial,
        train_final,
        test_initial,
        test_final,
        search_score,
    })
}

/// Runs every method on every partition. Cells run concurrently; a failing
/// cell is recorded in `failures` and the rest of the experiment continues.
pub fn run_experiment(
    ds: &Dataset,
    methods: &[MethodId],
    n_partitions: usize,
    master_seed: u64,
    configs: &MethodConfigs,
) -> Result<ExperimentReport, HarnessError> {
    configs.validate()?;
    if methods.is_empty() {
        return Err(HarnessError::InvalidConfig("no methods selected".into()));
    }
    let mut methods = methods.to_vec();
    methods.dedup();
    let plans = make_splits(ds, n_partitions, master_seed)?;
    let cells: Vec<(MethodId, &SplitPlan)> = methods
        .iter()
        .flat_map(|&m| plans.iter().map(move |p| (m, p)))
        .collect();
    let outcomes = parallel::map(&cells, |&(m, plan)| {
        log::info!("{m} partition {}: start", plan.partition_id);
        let r = run_method(ds, plan, m, configs, master_seed);
        match &r {
            Ok(row) => log::info!(
                "{m} partition {}: {} features, test MMRE {:.3}",
                plan.partition_id,
                row.n_selected,
                row.test_final.mmre
            ),
            Err(e) => log::warn!("{e}"),
        }
        r
    });

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for ((m, plan), outcome) in cells.iter().zip(outcomes) {
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => failures.push(CellFailure {
                method: *m,
                partition_id: plan.partition_id,
                error: e.to_string(),
            }),
        }
    }
    let mut aggregates = Vec::new();
    let mut consistency = Vec::new();
    for &m in &methods {
        let rows: Vec<&PartitionResult> = results.iter().filter(|r| r.method == m).collect();
        aggregates.extend(MethodAggregate::from_rows(m, &rows));
        consistency.push(Consistency::from_rows(m, &rows, n_partitions, ds.n_features()));
    }
    Ok(ExperimentReport {
        format: REPORT_FORMAT.to_owned(),
        features: ds
            .features()
            .iter()
            .map(|f| FeatureRef {
                id: f.id,
                code: f.code.clone(),
            })
            .collect(),
        results,
        failures,
        aggregates,
        consistency,
        provenance: ReportProvenance {
            dataset_sha256: dataset_digest(ds),
            n_projects: ds.n_projects(),
            master_seed,
            n_partitions,
            methods,
            configs: *configs,
            splits: plans
                .iter()
                .map(|p| SplitRecord {
                    partition_id: p.partition_id,
                    seed: p.seed,
                    test: p.test.clone(),
                })
                .collect(),
        },
    })
}
