//! Clustered data, CSV ingestion, formulas and design matrices.

mod csv_io;
mod design;
mod formula;

pub use csv_io::{load_csv, load_csv_reader, write_csv, write_csv_writer};
pub use design::{build_designs, ClusterDesign, DesignBundle};
pub use formula::{parse_corr_formula, parse_mean_formula, CorrFormula, CorrTerm, MeanFormula, MeanTerm};

use std::cmp::Ordering;

use crate::error::{GcrError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// Values of one column within one cluster. Missing numeric cells are NaN,
/// missing categorical cells are empty strings.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ColumnKind {
        match self {
            ColumnData::Numeric(_) => ColumnKind::Numeric,
            ColumnData::Categorical(_) => ColumnKind::Categorical,
        }
    }

    pub fn value(&self, j: usize) -> Value<'_> {
        match self {
            ColumnData::Numeric(v) => Value::Num(v[j]),
            ColumnData::Categorical(v) => Value::Str(&v[j]),
        }
    }

    fn select(&self, idx: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(idx.iter().map(|&i| v[i]).collect()),
            ColumnData::Categorical(v) => {
                ColumnData::Categorical(idx.iter().map(|&i| v[i].clone()).collect())
            }
        }
    }
}

/// A single cell value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value<'a> {
    Num(f64),
    Str(&'a str),
}

impl Value<'_> {
    pub fn is_missing(&self) -> bool {
        match self {
            Value::Num(v) => v.is_nan(),
            Value::Str(s) => s.is_empty(),
        }
    }

    /// Total order used for category levels: numeric before string, numbers
    /// by value, strings lexicographically.
    pub fn level_cmp(&self, other: &Value<'_>) -> Ordering {
        match (self, other) {
            (Value::Num(a), Value::Num(b)) => a.total_cmp(b),
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            (Value::Num(_), Value::Str(_)) => Ordering::Less,
            (Value::Str(_), Value::Num(_)) => Ordering::Greater,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Value::Num(v) => format!("{v}"),
            Value::Str(s) => (*s).to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub id: String,
    pub y: Vec<f64>,
    /// One entry per dataset column, in dataset column order.
    pub columns: Vec<ColumnData>,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.y.len()
    }

    /// Reorders observations by `idx`.
    pub fn permuted(&self, idx: &[usize]) -> Cluster {
        Cluster {
            id: self.id.clone(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            columns: self.columns.iter().map(|c| c.select(idx)).collect(),
        }
    }
}

/// Observations grouped into clusters of possibly unequal size.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredDataset {
    cluster_name: String,
    response_name: String,
    column_names: Vec<String>,
    column_kinds: Vec<ColumnKind>,
    clusters: Vec<Cluster>,
}

impl ClusteredDataset {
    pub fn new(
        cluster_name: impl Into<String>,
        response_name: impl Into<String>,
        column_names: Vec<String>,
        column_kinds: Vec<ColumnKind>,
        clusters: Vec<Cluster>,
    ) -> Result<Self> {
        if column_names.len() != column_kinds.len() {
            return Err(GcrError::Validation("column names and kinds differ in length".into()));
        }
        if clusters.is_empty() {
            return Err(GcrError::Validation("dataset has no clusters".into()));
        }
        for c in &clusters {
            if c.y.is_empty() {
                return Err(GcrError::Validation(format!("cluster '{}' is empty", c.id)));
            }
            if c.columns.len() != column_names.len() {
                return Err(GcrError::Validation(format!(
                    "cluster '{}' has {} columns, expected {}",
                    c.id,
                    c.columns.len(),
                    column_names.len()
                )));
            }
            for (col, kind) in c.columns.iter().zip(&column_kinds) {
                if col.len() != c.y.len() || col.kind() != *kind {
                    return Err(GcrError::Validation(format!(
                        "cluster '{}' has a malformed column",
                        c.id
                    )));
                }
            }
        }
        Ok(ClusteredDataset {
            cluster_name: cluster_name.into(),
            response_name: response_name.into(),
            column_names,
            column_kinds,
            clusters,
        })
    }

    pub fn cluster_name(&self) -> &str {
        &self.cluster_name
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn column_kind(&self, idx: usize) -> ColumnKind {
        self.column_kinds[idx]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|n| n == name)
    }

    pub fn require_column(&self, name: &str) -> Result<usize> {
        self.column_index(name)
            .ok_or_else(|| GcrError::Build(format!("unknown column '{name}'")))
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Total number of observations `N`.
    pub fn total_obs(&self) -> usize {
        self.clusters.iter().map(Cluster::size).sum()
    }

    /// A dataset holding only the clusters at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Result<ClusteredDataset> {
        ClusteredDataset::new(
            self.cluster_name.clone(),
            self.response_name.clone(),
            self.column_names.clone(),
            self.column_kinds.clone(),
            idx.iter().map(|&i| self.clusters[i].clone()).collect(),
        )
    }

    /// Sorted distinct non-missing values of a column across all clusters.
    pub fn levels(&self, col: usize) -> Vec<Value<'_>> {
        let mut vals: Vec<Value<'_>> = Vec::new();
        for c in &self.clusters {
            for j in 0..c.size() {
                let v = c.columns[col].value(j);
                if !v.is_missing() {
                    vals.push(v);
                }
            }
        }
        vals.sort_by(|a, b| a.level_cmp(b));
        vals.dedup_by(|a, b| a.level_cmp(b) == Ordering::Equal);
        vals
    }
}
