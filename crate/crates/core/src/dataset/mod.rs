//! Project datasets: raw CSV tables, the preprocessing pipeline that turns
//! them into normalized feature matrices, and the train/test split plans used
//! by the experiment protocol.

mod ingest;
mod raw;
mod split;

pub use ingest::{
    ingest, ingest_with_report, minmax_normalize, one_hot, IngestReport, PreprocessRules, QualityRule,
};
pub use raw::{is_null, ColumnKind, RawColumn, RawTable, TableSchema};
pub use split::{make_splits, train_size, SplitPlan, N_FOLDS, TRAIN_FRACTION};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Smallest dataset that leaves at least one row per fold in every fold of
/// an 80% training split.
pub const MIN_PROJECTS: usize = 20;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("effort column {0:?} not found")]
    MissingEffortColumn(String),
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("effort must be positive; row {row} has {value}")]
    NonPositiveEffort { row: usize, value: f64 },
    #[error("no rows")]
    NoRows,
    #[error("no feature columns survived preprocessing")]
    NoFeatures,
    #[error("{0} projects is too few; at least {MIN_PROJECTS} are needed for 10-fold CV inside an 80% split")]
    TooFewRows(usize),
    #[error("column {column:?} row {row}: {value:?} is not a number")]
    InvalidNumber { column: String, row: usize, value: String },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    Numeric,
    BinaryIndicator,
}

/// Metadata for one input column of a [`Dataset`].
///
/// `id` follows the attribute-table convention of the effort literature: the
/// effort target is attribute 0 and features are numbered from 1 in column
/// order, so feature column `i` has id `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub id: usize,
    pub code: String,
    pub kind: FeatureKind,
    pub source_column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_value: Option<String>,
    pub norm_min: f64,
    pub norm_max: f64,
}

impl FeatureDescriptor {
    /// Maps a normalized value back to the original scale.
    pub fn denormalize(&self, v: f64) -> f64 {
        self.norm_min + v * (self.norm_max - self.norm_min)
    }
}

/// Immutable canonical dataset: normalized features in [0, 1], strictly
/// positive effort in original units, no nulls, at least [`MIN_PROJECTS`] rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    z: DVector<f64>,
    features: Vec<FeatureDescriptor>,
    effort_norm: (f64, f64),
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, z: DVector<f64>, features: Vec<FeatureDescriptor>) -> Result<Self, DatasetError> {
        if x.nrows() == 0 {
            return Err(DatasetError::NoRows);
        }
        if x.ncols() == 0 {
            return Err(DatasetError::NoFeatures);
        }
        if x.nrows() != z.len() {
            return Err(DatasetError::Invalid(format!(
                "{} feature rows but {} effort values",
                x.nrows(),
                z.len()
            )));
        }
        if features.len() != x.ncols() {
            return Err(DatasetError::Invalid(format!(
                "{} descriptors for {} feature columns",
                features.len(),
                x.ncols()
            )));
        }
        if x.nrows() < MIN_PROJECTS {
            return Err(DatasetError::TooFewRows(x.nrows()));
        }
        for (row, &value) in z.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(DatasetError::NonPositiveEffort { row, value });
            }
        }
        for (j, f) in features.iter().enumerate() {
            if !(f.norm_min <= f.norm_max) {
                return Err(DatasetError::Invalid(format!("feature {} has min > max", f.code)));
            }
            for i in 0..x.nrows() {
                let v = x[(i, j)];
                let ok = match f.kind {
                    FeatureKind::Numeric => (0.0..=1.0).contains(&v),
                    FeatureKind::BinaryIndicator => v == 0.0 || v == 1.0,
                };
                if !ok {
                    return Err(DatasetError::Invalid(format!(
                        "feature {} row {i} has out-of-range value {v}",
                        f.code
                    )));
                }
            }
        }
        let effort_norm = (z.min(), z.max());
        Ok(Self {
            x,
            z,
            features,
            effort_norm,
        })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn z(&self) -> &DVector<f64> {
        &self.z
    }

    pub fn features(&self) -> &[FeatureDescriptor] {
        &self.features
    }

    pub fn effort_norm(&self) -> (f64, f64) {
        self.effort_norm
    }

    pub fn n_projects(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// Feature ids for a set of column indices.
    pub fn ids_of(&self, columns: &[usize]) -> Vec<usize> {
        columns.iter().map(|&c| self.features[c].id).collect()
    }

    /// Export as a table that re-ingests to an equal matrix: one numeric or
    /// indicator column per feature, named by code, plus the effort column.
    pub fn to_raw_table(&self, effort_name: &str) -> RawTable {
        let mut columns: Vec<RawColumn> = self
            .features
            .iter()
            .map(|f| RawColumn {
                name: f.code.clone(),
                kind: match f.kind {
                    FeatureKind::Numeric => ColumnKind::Numeric,
                    FeatureKind::BinaryIndicator => ColumnKind::Indicator,
                },
            })
            .collect();
        columns.push(RawColumn {
            name: effort_name.to_owned(),
            kind: ColumnKind::Effort,
        });
        let rows = (0..self.n_projects())
            .map(|i| {
                let mut r: Vec<Option<String>> =
                    (0..self.n_features()).map(|j| Some(format!("{:?}", self.x[(i, j)]))).collect();
                r.push(Some(format!("{:?}", self.z[i])));
                r
            })
            .collect();
        RawTable::new(columns, rows).expect("canonical export is well formed")
    }
}

/// Where a persisted dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the source file, hex encoded.
    pub source_sha256: String,
    pub source_name: String,
    pub rules: PreprocessRules,
}

pub const DATASET_FORMAT: &str = "fss-dataset/1";

/// On-disk JSON form of a [`Dataset`].
///
/// ```json
/// { "format": "fss-dataset/1",
///   "features": [ { "id": 1, "code": "TE", "kind": "numeric", ... } ],
///   "rows": [[0.25, 1.0, ...], ...],   // normalized matrix, row-major
///   "effort": [5152.0, ...],           // original units
///   "effort_norm": [546.0, 23940.0],
///   "provenance": { "source_sha256": "...", "source_name": "...", "rules": { ... } } }
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetFile {
    pub format: String,
    pub features: Vec<FeatureDescriptor>,
    pub rows: Vec<Vec<f64>>,
    pub effort: Vec<f64>,
    pub effort_norm: (f64, f64),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl DatasetFile {
    pub fn from_dataset(ds: &Dataset, provenance: Option<Provenance>) -> Self {
        Self {
            format: DATASET_FORMAT.to_owned(),
            features: ds.features.clone(),
            rows: ds.x.row_iter().map(|r| r.iter().copied().collect()).collect(),
            effort: ds.z.iter().copied().collect(),
            effort_norm: ds.effort_norm,
            provenance,
        }
    }

    pub fn into_dataset(self) -> Result<Dataset, DatasetError> {
        if self.format != DATASET_FORMAT {
            return Err(DatasetError::Invalid(format!("unsupported format {:?}", self.format)));
        }
        let n = self.rows.len();
        let d = self.features.len();
        if self.rows.iter().any(|r| r.len() != d) {
            return Err(DatasetError::Invalid("ragged feature rows".into()));
        }
        let x = DMatrix::from_fn(n, d, |i, j| self.rows[i][j]);
        Dataset::new(x, DVector::from_vec(self.effort), self.features)
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
