use super::DatasetError;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::io::Read;

/// Declared role of a raw column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    /// Already-encoded 0/1 indicator; passed through without rescaling.
    Indicator,
    QualityGrade,
    Effort,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawColumn {
    pub name: String,
    pub kind: ColumnKind,
}

/// How a CSV is read into a [`RawTable`]: which column is the effort target,
/// which cell values mean "missing", and any declared column kinds. Columns
/// without a declaration are numeric when every non-null cell parses as a
/// number and categorical otherwise.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub effort_column: String,
    #[serde(default)]
    pub null_markers: Vec<String>,
    #[serde(default)]
    pub kinds: BTreeMap<String, ColumnKind>,
    #[serde(default)]
    pub quality_column: Option<String>,
}

/// Rows of string cells with `None` for nulls, plus one declared kind per
/// column. Column names are unique and exactly one column is the effort.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    columns: Vec<RawColumn>,
    rows: Vec<Vec<Option<String>>>,
}

impl RawTable {
    pub fn new(columns: Vec<RawColumn>, rows: Vec<Vec<Option<String>>>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(DatasetError::DuplicateColumn(c.name.clone()));
            }
        }
        let efforts = columns.iter().filter(|c| c.kind == ColumnKind::Effort).count();
        if efforts == 0 {
            return Err(DatasetError::MissingEffortColumn(String::new()));
        }
        if efforts > 1 {
            return Err(DatasetError::Invalid("more than one effort column".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != columns.len() {
                return Err(DatasetError::Invalid(format!(
                    "row {} has {} cells, expected {}",
                    i + 1,
                    r.len(),
                    columns.len()
                )));
            }
        }
        Ok(Self { columns, rows })
    }

    /// Reads an RFC-4180 CSV with a header row.
    pub fn read_csv<R: Read>(reader: R, schema: &TableSchema) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            rows.push(
                rec.iter()
                    .map(|cell| {
                        if is_null(cell, &schema.null_markers) {
                            None
                        } else {
                            Some(cell.to_owned())
                        }
                    })
                    .collect(),
            );
        }
        Self::from_cells(header, rows, schema)
    }

    /// Builds a table from a header and already-null-resolved cells,
    /// resolving kinds from the schema.
    pub fn from_cells(
        header: Vec<String>,
        rows: Vec<Vec<Option<String>>>,
        schema: &TableSchema,
    ) -> Result<Self, DatasetError> {
        if !header.contains(&schema.effort_column) {
            return Err(DatasetError::MissingEffortColumn(schema.effort_column.clone()));
        }
        for name in schema.kinds.keys() {
            if !header.contains(name) {
                log::warn!("declared column {name:?} is not in the input");
            }
        }
        let columns = header
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let kind = if *name == schema.effort_column {
                    ColumnKind::Effort
                } else if schema.quality_column.as_deref() == Some(name.as_str()) {
                    ColumnKind::QualityGrade
                } else if let Some(&k) = schema.kinds.get(name) {
                    k
                } else if rows
                    .iter()
                    .filter_map(|r| r[j].as_deref())
                    .all(|c| c.parse::<f64>().is_ok())
                {
                    ColumnKind::Numeric
                } else {
                    ColumnKind::Categorical
                };
                RawColumn { name: name.clone(), kind }
            })
            .collect();
        Self::new(columns, rows)
    }

    pub fn columns(&self) -> &[RawColumn] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Option<String>>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn effort_index(&self) -> usize {
        self.columns
            .iter()
            .position(|c| c.kind == ColumnKind::Effort)
            .expect("validated on construction")
    }
}

/// Empty cells and any of the configured markers (case-sensitive) are null.
pub fn is_null(cell: &str, markers: &[String]) -> bool {
    let t = cell.trim();
    t.is_empty() || markers.iter().any(|m| m == t)
}
