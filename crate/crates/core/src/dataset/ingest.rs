use super::raw::{ColumnKind, RawTable, TableSchema};
use super::{Dataset, DatasetError, FeatureDescriptor, FeatureKind};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Row/column filtering and encoding rules applied by [`ingest`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessRules {
    pub effort_column: String,
    /// Cell values treated as null in addition to the empty string.
    #[serde(default)]
    pub null_markers: Vec<String>,
    /// Columns whose null fraction exceeds this are dropped.
    #[serde(default = "default_null_threshold")]
    pub null_threshold: f64,
    /// Columns removed before anything else (attributes only known after
    /// project completion, identifiers, ...).
    #[serde(default)]
    pub drop_columns: Vec<String>,
    #[serde(default)]
    pub quality: Option<QualityRule>,
    /// Declared kinds; undeclared columns are inferred.
    #[serde(default)]
    pub kinds: BTreeMap<String, ColumnKind>,
    /// Short feature codes by column name; defaults to the column name.
    #[serde(default)]
    pub codes: BTreeMap<String, String>,
    /// Columns placed first, in this order; the rest follow in file order.
    #[serde(default)]
    pub column_order: Vec<String>,
}

fn default_null_threshold() -> f64 {
    0.40
}

/// Keeps rows whose grade is at or better than `worst_accepted`; grades
/// compare alphabetically ("A" best). Rows without a grade are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityRule {
    pub column: String,
    #[serde(default = "default_grade")]
    pub worst_accepted: String,
}

fn default_grade() -> String {
    "B".into()
}

impl PreprocessRules {
    pub fn new(effort_column: impl Into<String>) -> Self {
        Self {
            effort_column: effort_column.into(),
            null_markers: Vec::new(),
            null_threshold: default_null_threshold(),
            drop_columns: Vec::new(),
            quality: None,
            kinds: BTreeMap::new(),
            codes: BTreeMap::new(),
            column_order: Vec::new(),
        }
    }

    pub fn table_schema(&self) -> TableSchema {
        TableSchema {
            effort_column: self.effort_column.clone(),
            null_markers: self.null_markers.clone(),
            kinds: self.kinds.clone(),
            quality_column: self.quality.as_ref().map(|q| q.column.clone()),
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if !(0.0..=1.0).contains(&self.null_threshold) {
            return Err(DatasetError::Invalid(format!(
                "null_threshold {} outside [0, 1]",
                self.null_threshold
            )));
        }
        Ok(())
    }
}

/// What [`ingest_with_report`] removed along the way.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub rows_in: usize,
    pub rows_after_quality: usize,
    pub rows_out: usize,
    /// `(column, reason)` pairs in the order the columns were dropped.
    pub dropped_columns: Vec<(String, String)>,
    pub n_features: usize,
}

pub fn ingest(raw: &RawTable, rules: &PreprocessRules) -> Result<Dataset, DatasetError> {
    ingest_with_report(raw, rules).map(|(d, _)| d)
}

/// Filters, encodes and normalizes a raw table, in order: drop configured
/// columns; drop columns over the null threshold; drop rows failing the
/// quality rule; drop rows with a null numeric value; one-hot encode
/// categorical columns; min-max normalize numeric columns.
pub fn ingest_with_report(raw: &RawTable, rules: &PreprocessRules) -> Result<(Dataset, IngestReport), DatasetError> {
    rules.validate()?;
    let effort_col = raw
        .column_index(&rules.effort_column)
        .filter(|&i| raw.columns()[i].kind == ColumnKind::Effort)
        .ok_or_else(|| DatasetError::MissingEffortColumn(rules.effort_column.clone()))?;
    let mut report = IngestReport {
        rows_in: raw.n_rows(),
        ..Default::default()
    };
    if raw.n_rows() == 0 {
        return Err(DatasetError::NoRows);
    }

    // (a) configured drops
    let mut keep: Vec<usize> = Vec::new();
    for (j, col) in raw.columns().iter().enumerate() {
        if rules.drop_columns.contains(&col.name) && j != effort_col {
            report.dropped_columns.push((col.name.clone(), "configured".into()));
        } else {
            keep.push(j);
        }
    }
    for name in &rules.drop_columns {
        if raw.column_index(name).is_none() {
            log::warn!("drop column {name:?} not present");
        }
    }

    // (b) null fraction
    let n = raw.n_rows() as f64;
    keep.retain(|&j| {
        let col = &raw.columns()[j];
        if matches!(col.kind, ColumnKind::Effort | ColumnKind::QualityGrade) {
            return true;
        }
        let nulls = raw.rows().iter().filter(|r| r[j].is_none()).count();
        let frac = nulls as f64 / n;
        if frac > rules.null_threshold {
            report
                .dropped_columns
                .push((col.name.clone(), format!("{:.1}% nulls", 100.0 * frac)));
            false
        } else {
            true
        }
    });

    // (c) quality grade
    let mut rows: Vec<usize> = (0..raw.n_rows()).collect();
    if let Some(q) = &rules.quality {
        let qc = raw
            .column_index(&q.column)
            .ok_or_else(|| DatasetError::Invalid(format!("quality column {:?} not found", q.column)))?;
        let worst = q.worst_accepted.trim().to_uppercase();
        rows.retain(|&i| match &raw.rows()[i][qc] {
            Some(g) => g.trim().to_uppercase() <= worst,
            None => false,
        });
    }
    report.rows_after_quality = rows.len();

    // (d) nulls in numeric columns (effort included)
    let is_numeric = |j: usize| {
        matches!(
            raw.columns()[j].kind,
            ColumnKind::Numeric | ColumnKind::Indicator | ColumnKind::Effort
        )
    };
    rows.retain(|&i| keep.iter().all(|&j| !is_numeric(j) || raw.rows()[i][j].is_some()));
    report.rows_out = rows.len();
    if rows.is_empty() {
        return Err(DatasetError::NoRows);
    }

    let parse_col = |j: usize| -> Result<Vec<f64>, DatasetError> {
        rows.iter()
            .map(|&i| {
                let cell = raw.rows()[i][j].as_deref().expect("nulls filtered");
                cell.trim().parse::<f64>().map_err(|_| DatasetError::InvalidNumber {
                    column: raw.columns()[j].name.clone(),
                    row: i + 1,
                    value: cell.to_owned(),
                })
            })
            .collect()
    };

    let z = parse_col(effort_col)?;
    for (k, &v) in z.iter().enumerate() {
        if !(v > 0.0) || !v.is_finite() {
            return Err(DatasetError::NonPositiveEffort { row: rows[k] + 1, value: v });
        }
    }

    // feature column order
    let mut ordered: Vec<usize> = Vec::new();
    for name in &rules.column_order {
        if let Some(j) = raw.column_index(name) {
            if keep.contains(&j) && !ordered.contains(&j) {
                ordered.push(j);
            }
        } else {
            log::warn!("ordered column {name:?} not present");
        }
    }
    for &j in &keep {
        if !ordered.contains(&j) {
            ordered.push(j);
        }
    }

    // (e) + (f)
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut features: Vec<FeatureDescriptor> = Vec::new();
    for j in ordered {
        let col = &raw.columns()[j];
        let code = rules.codes.get(&col.name).cloned().unwrap_or_else(|| col.name.clone());
        match col.kind {
            ColumnKind::Effort | ColumnKind::QualityGrade => {}
            ColumnKind::Numeric => {
                let (norm, min, max) = minmax_normalize(&parse_col(j)?);
                columns.push(norm);
                features.push(FeatureDescriptor {
                    id: 0,
                    code,
                    kind: FeatureKind::Numeric,
                    source_column: col.name.clone(),
                    category_value: None,
                    norm_min: min,
                    norm_max: max,
                });
            }
            ColumnKind::Indicator => {
                let values = parse_col(j)?;
                if let Some(bad) = values.iter().find(|&&v| v != 0.0 && v != 1.0) {
                    return Err(DatasetError::Invalid(format!(
                        "indicator column {:?} has value {bad}",
                        col.name
                    )));
                }
                columns.push(values);
                features.push(FeatureDescriptor {
                    id: 0,
                    code,
                    kind: FeatureKind::BinaryIndicator,
                    source_column: col.name.clone(),
                    category_value: None,
                    norm_min: 0.0,
                    norm_max: 1.0,
                });
            }
            ColumnKind::Categorical => {
                let cells: Vec<Option<&str>> = rows.iter().map(|&i| raw.rows()[i][j].as_deref()).collect();
                for (level, values) in one_hot(&cells) {
                    columns.push(values);
                    features.push(FeatureDescriptor {
                        id: 0,
                        code: format!("{code}={level}"),
                        kind: FeatureKind::BinaryIndicator,
                        source_column: col.name.clone(),
                        category_value: Some(level),
                        norm_min: 0.0,
                        norm_max: 1.0,
                    });
                }
            }
        }
    }
    if features.is_empty() {
        return Err(DatasetError::NoFeatures);
    }
    for (k, f) in features.iter_mut().enumerate() {
        f.id = k + 1;
    }
    report.n_features = features.len();

    let x = DMatrix::from_fn(rows.len(), columns.len(), |i, j| columns[j][i]);
    let ds = Dataset::new(x, DVector::from_vec(z), features)?;
    Ok((ds, report))
}

/// One indicator column per distinct non-null value, levels sorted. Null
/// cells get 0 in every produced column.
pub fn one_hot(cells: &[Option<&str>]) -> Vec<(String, Vec<f64>)> {
    let levels: BTreeSet<&str> = cells.iter().flatten().copied().collect();
    levels
        .into_iter()
        .map(|level| {
            let col = cells
                .iter()
                .map(|c| if *c == Some(level) { 1.0 } else { 0.0 })
                .collect();
            (level.to_owned(), col)
        })
        .collect()
}

/// `(v - min) / (max - min)` elementwise; a constant column maps to zeros.
pub fn minmax_normalize(values: &[f64]) -> (Vec<f64>, f64, f64) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    let norm = values
        .iter()
        .map(|&v| if range > 0.0 { (v - min) / range } else { 0.0 })
        .collect();
    (norm, min, max)
}
