use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use super::formula::{CorrFormula, CorrTerm, MeanFormula, MeanTerm};
use super::{Cluster, ClusteredDataset, ColumnKind, Value};
use crate::corr_manifold::{vecl_len, vecl_pairs};
use crate::error::{GcrError, Result};

/// Design matrices of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDesign {
    /// `m x p` mean-model design.
    pub x: DMatrix<f64>,
    /// `m(m-1)/2 x d` pair covariates, rows in vecl order.
    pub w: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl ClusterDesign {
    pub fn size(&self) -> usize {
        self.y.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignBundle {
    pub mean_names: Vec<String>,
    pub corr_names: Vec<String>,
    pub clusters: Vec<ClusterDesign>,
}

impl DesignBundle {
    pub fn p(&self) -> usize {
        self.mean_names.len()
    }

    pub fn d(&self) -> usize {
        self.corr_names.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn total_obs(&self) -> usize {
        self.clusters.iter().map(ClusterDesign::size).sum()
    }

    pub fn total_pairs(&self) -> usize {
        self.clusters.iter().map(|c| c.w.nrows()).sum()
    }

    /// The bundle restricted to clusters at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> DesignBundle {
        DesignBundle {
            mean_names: self.mean_names.clone(),
            corr_names: self.corr_names.clone(),
            clusters: idx.iter().map(|&i| self.clusters[i].clone()).collect(),
        }
    }

    /// Same designs with `W` replaced by an intercept column per pair.
    pub fn with_intercept_corr(&self) -> DesignBundle {
        DesignBundle {
            mean_names: self.mean_names.clone(),
            corr_names: vec!["intercept".into()],
            clusters: self
                .clusters
                .iter()
                .map(|c| ClusterDesign {
                    x: c.x.clone(),
                    w: DMatrix::from_element(c.w.nrows(), 1, 1.0),
                    y: c.y.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Level {
    Num(f64),
    Str(String),
}

impl Level {
    fn from_value(v: Value<'_>) -> Level {
        match v {
            Value::Num(x) => Level::Num(x),
            Value::Str(s) => Level::Str(s.to_string()),
        }
    }

    fn matches(&self, v: Value<'_>) -> bool {
        match (self, v) {
            (Level::Num(a), Value::Num(b)) => a.total_cmp(&b) == Ordering::Equal,
            (Level::Str(a), Value::Str(b)) => a == b,
            _ => false,
        }
    }

    fn label(&self) -> String {
        match self {
            Level::Num(v) => format!("{v}"),
            Level::Str(s) => s.clone(),
        }
    }
}

/// One factor of a mean-design column.
#[derive(Debug, Clone)]
enum Basis {
    Num(usize),
    Indicator(usize, Level),
}

/// Product of bases; each expands to one column of X.
#[derive(Debug, Clone)]
struct MeanColumn {
    name: String,
    factors: Vec<Basis>,
}

fn expand_term(data: &ClusteredDataset, term: &MeanTerm) -> Result<Vec<MeanColumn>> {
    match term {
        MeanTerm::Numeric(name) => {
            let col = data.require_column(name)?;
            if data.column_kind(col) == ColumnKind::Categorical {
                categorical_columns(data, name, col)
            } else {
                Ok(vec![MeanColumn { name: name.clone(), factors: vec![Basis::Num(col)] }])
            }
        }
        MeanTerm::Categorical(name) => {
            let col = data.require_column(name)?;
            categorical_columns(data, name, col)
        }
        MeanTerm::Interaction(a, b) => {
            let left = expand_term(data, a)?;
            let right = expand_term(data, b)?;
            let mut out = Vec::with_capacity(left.len() * right.len());
            for l in &left {
                for r in &right {
                    let mut factors = l.factors.clone();
                    factors.extend(r.factors.iter().cloned());
                    out.push(MeanColumn { name: format!("{}:{}", l.name, r.name), factors });
                }
            }
            Ok(out)
        }
    }
}

fn categorical_columns(data: &ClusteredDataset, name: &str, col: usize) -> Result<Vec<MeanColumn>> {
    let levels = data.levels(col);
    if levels.len() < 2 {
        return Err(GcrError::Build(format!(
            "categorical column '{name}' has fewer than two levels"
        )));
    }
    Ok(levels
        .into_iter()
        .skip(1)
        .map(|lv| {
            let level = Level::from_value(lv);
            MeanColumn {
                name: format!("C({name})[{}]", level.label()),
                factors: vec![Basis::Indicator(col, level)],
            }
        })
        .collect())
}

fn mean_value(c: &Cluster, j: usize, factors: &[Basis]) -> f64 {
    factors
        .iter()
        .map(|b| match b {
            Basis::Num(col) => match c.columns[*col].value(j) {
                Value::Num(v) => v,
                Value::Str(_) => f64::NAN,
            },
            Basis::Indicator(col, level) => {
                if level.matches(c.columns[*col].value(j)) {
                    1.0
                } else {
                    0.0
                }
            }
        })
        .product()
}

fn mean_columns_used(term: &MeanTerm, out: &mut Vec<String>) {
    match term {
        MeanTerm::Numeric(c) | MeanTerm::Categorical(c) => out.push(c.clone()),
        MeanTerm::Interaction(a, b) => {
            mean_columns_used(a, out);
            mean_columns_used(b, out);
        }
    }
}

/// Resolved correlation term with column indices and parsed values.
enum CorrCol {
    Intercept,
    Same(usize),
    BothEq(usize, Level),
    Diff(usize),
    AbsDiff(usize),
    SqDiff(usize),
    LogAbsDiff(usize),
}

fn resolve_corr(data: &ClusteredDataset, term: &CorrTerm) -> Result<CorrCol> {
    let numeric = |name: &str| -> Result<usize> {
        let col = data.require_column(name)?;
        if data.column_kind(col) != ColumnKind::Numeric {
            return Err(GcrError::Build(format!(
                "term '{term}' needs a numeric column, '{name}' is categorical"
            )));
        }
        Ok(col)
    };
    Ok(match term {
        CorrTerm::Intercept => CorrCol::Intercept,
        CorrTerm::Same(c) => CorrCol::Same(data.require_column(c)?),
        CorrTerm::BothEq(c, v) => {
            let col = data.require_column(c)?;
            let level = match data.column_kind(col) {
                ColumnKind::Numeric => Level::Num(v.parse::<f64>().map_err(|_| {
                    GcrError::Build(format!("value '{v}' in '{term}' is not numeric"))
                })?),
                ColumnKind::Categorical => Level::Str(v.clone()),
            };
            CorrCol::BothEq(col, level)
        }
        CorrTerm::Diff(c) => CorrCol::Diff(numeric(c)?),
        CorrTerm::AbsDiff(c) => CorrCol::AbsDiff(numeric(c)?),
        CorrTerm::SqDiff(c) => CorrCol::SqDiff(numeric(c)?),
        CorrTerm::LogAbsDiff(c) => CorrCol::LogAbsDiff(numeric(c)?),
    })
}

fn num(c: &Cluster, col: usize, j: usize) -> f64 {
    match c.columns[col].value(j) {
        Value::Num(v) => v,
        Value::Str(_) => f64::NAN,
    }
}

fn pair_value(c: &Cluster, j: usize, k: usize, term: &CorrCol) -> Result<f64> {
    let ind = |b: bool| if b { 1.0 } else { 0.0 };
    Ok(match term {
        CorrCol::Intercept => 1.0,
        CorrCol::Same(col) => {
            let a = c.columns[*col].value(j);
            let b = c.columns[*col].value(k);
            ind(a.level_cmp(&b) == Ordering::Equal)
        }
        CorrCol::BothEq(col, level) => {
            ind(level.matches(c.columns[*col].value(j)) && level.matches(c.columns[*col].value(k)))
        }
        CorrCol::Diff(col) => num(c, *col, j) - num(c, *col, k),
        CorrCol::AbsDiff(col) => (num(c, *col, j) - num(c, *col, k)).abs(),
        CorrCol::SqDiff(col) => (num(c, *col, j) - num(c, *col, k)).powi(2),
        CorrCol::LogAbsDiff(col) => {
            let d = (num(c, *col, j) - num(c, *col, k)).abs();
            if d == 0.0 {
                return Err(GcrError::Build(format!(
                    "cluster '{}' has duplicated values under a logabsdiff term",
                    c.id
                )));
            }
            d.ln()
        }
    })
}

/// Expands the formulas into per-cluster design matrices.
pub fn build_designs(
    data: &ClusteredDataset,
    mf: &MeanFormula,
    cf: &CorrFormula,
) -> Result<DesignBundle> {
    if cf.terms.is_empty() {
        return Err(GcrError::Build("correlation formula has no terms".into()));
    }
    let mut mean_cols = vec![MeanColumn { name: "(Intercept)".into(), factors: vec![] }];
    for t in &mf.terms {
        mean_cols.extend(expand_term(data, t)?);
    }
    let corr_cols: Vec<CorrCol> =
        cf.terms.iter().map(|t| resolve_corr(data, t)).collect::<Result<_>>()?;

    // Missing cells in any analysed column are rejected.
    let mut used = Vec::new();
    for t in &mf.terms {
        mean_columns_used(t, &mut used);
    }
    used.extend(cf.terms.iter().filter_map(|t| t.column().map(str::to_string)));
    let used: Vec<usize> = used.iter().map(|n| data.require_column(n)).collect::<Result<_>>()?;

    let p = mean_cols.len();
    let d = corr_cols.len();
    let mut clusters = Vec::with_capacity(data.n_clusters());
    for c in data.clusters() {
        let m = c.size();
        for &col in &used {
            if (0..m).any(|j| c.columns[col].value(j).is_missing()) {
                return Err(GcrError::Build(format!(
                    "cluster '{}' has a missing value in column '{}'",
                    c.id,
                    data.column_names()[col]
                )));
            }
        }
        let x = DMatrix::from_fn(m, p, |j, a| mean_value(c, j, &mean_cols[a].factors));
        let mut w = DMatrix::zeros(vecl_len(m), d);
        for (row, (j, k)) in vecl_pairs(m).into_iter().enumerate() {
            for (b, term) in corr_cols.iter().enumerate() {
                w[(row, b)] = pair_value(c, j, k, term)?;
            }
        }
        clusters.push(ClusterDesign { x, w, y: DVector::from_column_slice(&c.y) });
    }
    Ok(DesignBundle {
        mean_names: mean_cols.into_iter().map(|c| c.name).collect(),
        corr_names: cf.terms.iter().map(ToString::to_string).collect(),
        clusters,
    })
}
