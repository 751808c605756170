use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Cluster, ClusteredDataset, ColumnData, ColumnKind};
use crate::error::{GcrError, Result};

/// Reads a long-format CSV file, one row per observation.
///
/// Clusters appear in order of first occurrence. Observations keep file
/// order within their cluster unless `ordering_col` is given, in which case
/// they are stably sorted by that (numeric) column.
pub fn load_csv(
    path: impl AsRef<Path>,
    cluster_col: &str,
    response_col: &str,
    ordering_col: Option<&str>,
) -> Result<ClusteredDataset> {
    let file = File::open(path.as_ref())?;
    load_csv_reader(file, cluster_col, response_col, ordering_col)
}

pub fn load_csv_reader<R: Read>(
    reader: R,
    cluster_col: &str,
    response_col: &str,
    ordering_col: Option<&str>,
) -> Result<ClusteredDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| GcrError::Ingestion { row: 1, message: e.to_string() })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(GcrError::Ingestion { row: 1, message: "missing header row".into() });
    }
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| GcrError::Ingestion {
            row: 1,
            message: format!("column '{name}' not found in header"),
        })
    };
    let cluster_idx = find(cluster_col)?;
    let response_idx = find(response_col)?;
    let order_idx = ordering_col.map(find).transpose()?;

    // Every column except the response is retained as a covariate.
    let kept: Vec<usize> = (0..headers.len()).filter(|&i| i != response_idx).collect();

    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| GcrError::Ingestion {
            row: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(rows.len() + 2);
        rows.push((line, rec.iter().map(|s| s.trim().to_string()).collect()));
    }
    if rows.is_empty() {
        return Err(GcrError::Ingestion { row: 1, message: "file contains no data rows".into() });
    }

    let kinds: Vec<ColumnKind> = kept
        .iter()
        .map(|&c| {
            let mut any = false;
            let numeric = rows.iter().all(|(_, r)| {
                let cell = &r[c];
                if cell.is_empty() {
                    return true;
                }
                any = true;
                cell.parse::<f64>().is_ok()
            });
            if numeric && any && c != cluster_idx {
                ColumnKind::Numeric
            } else {
                ColumnKind::Categorical
            }
        })
        .collect();

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<usize>> = HashMap::new();
    let mut responses = Vec::with_capacity(rows.len());
    for (i, (line, r)) in rows.iter().enumerate() {
        let id = &r[cluster_idx];
        if id.is_empty() {
            return Err(GcrError::Ingestion { row: *line, message: "missing cluster id".into() });
        }
        let cell = &r[response_idx];
        if cell.is_empty() {
            return Err(GcrError::Ingestion {
                row: *line,
                message: format!("missing response '{response_col}'"),
            });
        }
        let y: f64 = cell.parse().map_err(|_| GcrError::Ingestion {
            row: *line,
            message: format!("response '{cell}' is not numeric"),
        })?;
        if !y.is_finite() {
            return Err(GcrError::Ingestion { row: *line, message: "response is not finite".into() });
        }
        responses.push(y);
        groups
            .entry(id.clone())
            .or_insert_with(|| {
                order.push(id.clone());
                Vec::new()
            })
            .push(i);
    }

    let order_pos = order_idx.map(|oi| kept.iter().position(|&k| k == oi).expect("kept"));
    if let Some(pos) = order_pos {
        if kinds[pos] != ColumnKind::Numeric {
            return Err(GcrError::Ingestion {
                row: 1,
                message: "ordering column must be numeric".into(),
            });
        }
    }

    let mut clusters = Vec::with_capacity(order.len());
    for id in order {
        let mut members = groups.remove(&id).expect("group exists");
        if let Some(oi) = order_idx {
            let key = |i: &usize| rows[*i].1[oi].parse::<f64>().unwrap_or(f64::NAN);
            members.sort_by(|a, b| key(a).total_cmp(&key(b)));
        }
        let columns = kept
            .iter()
            .zip(&kinds)
            .map(|(&c, kind)| match kind {
                ColumnKind::Numeric => ColumnData::Numeric(
                    members
                        .iter()
                        .map(|&i| rows[i].1[c].parse::<f64>().unwrap_or(f64::NAN))
                        .collect(),
                ),
                ColumnKind::Categorical => {
                    ColumnData::Categorical(members.iter().map(|&i| rows[i].1[c].clone()).collect())
                }
            })
            .collect();
        clusters.push(Cluster {
            id,
            y: members.iter().map(|&i| responses[i]).collect(),
            columns,
        });
    }

    ClusteredDataset::new(
        cluster_col,
        response_col,
        kept.iter().map(|&c| headers[c].clone()).collect(),
        kinds,
        clusters,
    )
}

/// Writes a dataset in the same long format `load_csv` reads.
pub fn write_csv(data: &ClusteredDataset, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    write_csv_writer(data, file)
}

pub fn write_csv_writer<W: Write>(data: &ClusteredDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let cluster_in_cols = data.column_index(data.cluster_name());
    let mut header = vec![data.cluster_name().to_string(), data.response_name().to_string()];
    for (i, n) in data.column_names().iter().enumerate() {
        if Some(i) != cluster_in_cols {
            header.push(n.clone());
        }
    }
    w.write_record(&header)?;
    for c in data.clusters() {
        for j in 0..c.size() {
            let mut rec = vec![c.id.clone(), format!("{}", c.y[j])];
            for (i, col) in c.columns.iter().enumerate() {
                if Some(i) == cluster_in_cols {
                    continue;
                }
                rec.push(match col {
                    ColumnData::Numeric(v) if v[j].is_nan() => String::new(),
                    ColumnData::Numeric(v) => format!("{}", v[j]),
                    ColumnData::Categorical(v) => v[j].clone(),
                });
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
