//! Representative subtables and cell-value samples.
//!
//! Rows of a table are clustered into `K` groups; from each group the `L`
//! rows with the fewest missing cells form the subtable (`N = K * L` rows).
//! Value samples drawn from a column keep the share of numeric values at or
//! below a configured ratio.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kmeans;
use crate::schema::{Cell, RowSet};

#[derive(Debug, Error, PartialEq)]
pub enum SampleError {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Number of row clusters (`K`).
    pub clusters: usize,
    /// Rows kept per cluster (`L`).
    pub rows_per_cluster: usize,
    pub max_numeric_ratio: f64,
    /// Rendered values are cut to this many characters.
    pub value_truncate_len: usize,
    pub rng_seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            clusters: 5,
            rows_per_cluster: 2,
            max_numeric_ratio: 0.5,
            value_truncate_len: 64,
            rng_seed: 0,
        }
    }
}

impl SamplerConfig {
    /// Subtable row budget `K * L`.
    pub fn row_budget(&self) -> usize {
        self.clusters * self.rows_per_cluster
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.clusters == 0 || self.rows_per_cluster == 0 {
            return Err("clusters and rows_per_cluster must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.max_numeric_ratio) {
            return Err(format!(
                "max_numeric_ratio {} outside [0, 1]",
                self.max_numeric_ratio
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubTable {
    pub table: String,
    pub column_order: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Cluster id of each row.
    pub provenance: Vec<usize>,
}

impl SubTable {
    pub fn as_row_set(&self) -> RowSet {
        RowSet {
            table: self.table.clone(),
            column_order: self.column_order.clone(),
            rows: self.rows.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSample {
    pub column: String,
    pub values: Vec<String>,
    pub numeric_count: usize,
}

impl ValueSample {
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn missing_count(row: &[Cell]) -> usize {
    row.iter().filter(|c| c.is_missing()).count()
}

/// Row indices ordered by ascending missing-cell count, stable on ties.
pub fn rank_rows_by_completeness(rows: &RowSet) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rows.rows.len()).collect();
    order.sort_by_key(|&i| missing_count(&rows.rows[i]));
    order
}

/// Per-row feature vector: numbers are z-scored per column, text is replaced
/// by its within-column frequency rank scaled to [0, 1], and nulls (or blobs)
/// become 0.5.
fn row_features(rows: &RowSet) -> Vec<Vec<f64>> {
    let width = rows.column_order.len();
    let n = rows.rows.len();
    let mut features = vec![vec![0.5; width]; n];
    for col in 0..width {
        let nums: Vec<f64> = rows.rows.iter().filter_map(|r| r[col].as_f64()).collect();
        let (mean, std) = if nums.is_empty() {
            (0.0, 0.0)
        } else {
            let mean = nums.iter().sum::<f64>() / nums.len() as f64;
            let var = nums.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nums.len() as f64;
            (mean, var.sqrt())
        };

        let mut freq: HashMap<&str, usize> = HashMap::new();
        for r in &rows.rows {
            if let Cell::Text(s) = &r[col] {
                *freq.entry(s.as_str()).or_default() += 1;
            }
        }
        let mut distinct: Vec<(&str, usize)> = freq.into_iter().collect();
        distinct.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let denom = distinct.len().saturating_sub(1).max(1) as f64;
        let rank: HashMap<&str, f64> = distinct
            .iter()
            .enumerate()
            .map(|(i, (s, _))| (*s, i as f64 / denom))
            .collect();

        for (f, r) in features.iter_mut().zip(&rows.rows) {
            f[col] = match &r[col] {
                Cell::Int(_) | Cell::Real(_) => {
                    let x = r[col].as_f64().unwrap_or(0.0);
                    if std > 0.0 && std.is_finite() {
                        (x - mean) / std
                    } else {
                        0.0
                    }
                }
                Cell::Text(s) => rank[s.as_str()],
                Cell::Null | Cell::Blob(_) => 0.5,
            };
        }
    }
    features
}

/// Assigns each row a cluster id in `[0, k)`. With at most `k` rows every row
/// is its own cluster.
pub fn cluster_rows(rows: &RowSet, k: usize, seed: u64) -> Vec<usize> {
    let k = k.max(1);
    let n = rows.rows.len();
    if n <= k {
        return (0..n).collect();
    }
    kmeans::kmeans(&row_features(rows), k, seed)
}

/// Builds the `K * L` row subtable: per cluster, the `L` most complete rows.
/// Rows are emitted grouped by cluster id, best-ranked first.
pub fn build_subtable(rows: &RowSet, cfg: &SamplerConfig) -> SubTable {
    let labels = cluster_rows(rows, cfg.clusters, cfg.rng_seed);
    let ranking = rank_rows_by_completeness(rows);
    let clusters = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut picked: Vec<Vec<usize>> = vec![Vec::new(); clusters];
    for i in ranking {
        let bucket = &mut picked[labels[i]];
        if bucket.len() < cfg.rows_per_cluster {
            bucket.push(i);
        }
    }
    let mut out = SubTable {
        table: rows.table.clone(),
        column_order: rows.column_order.clone(),
        rows: Vec::new(),
        provenance: Vec::new(),
    };
    for (cluster, members) in picked.into_iter().enumerate() {
        for i in members {
            out.rows.push(rows.rows[i].clone());
            out.provenance.push(cluster);
        }
    }
    out
}

/// Cuts a string to at most `max_chars` characters on a char boundary.
pub fn truncate_chars(s: &str, max_chars: usize) -> &str {
    match s.char_indices().nth(max_chars) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Largest numeric count `m` that can accompany `text` non-numeric values
/// without exceeding `n` values or the numeric ratio. A column with no
/// non-numeric values at all falls back to `floor(ratio * n)` numbers.
fn numeric_allowance(text: usize, numeric_available: usize, n: usize, ratio: f64) -> usize {
    let upper = numeric_available.min(n - text);
    if text == 0 {
        return upper.min((ratio * n as f64).floor() as usize);
    }
    (0..=upper)
        .rev()
        .find(|&m| m as f64 <= (ratio * (text + m) as f64).floor() + 1e-9)
        .unwrap_or(0)
}

/// Samples up to `n` distinct rendered values of `column` in row order,
/// excluding missing cells and blobs, under the numeric-share cap.
pub fn sample_cell_values(
    rows: &RowSet,
    column: &str,
    n: usize,
    cfg: &SamplerConfig,
) -> Result<ValueSample, SampleError> {
    let idx = rows
        .column_index(column)
        .ok_or_else(|| SampleError::UnknownColumn(column.to_string()))?;
    let mut seen = HashSet::new();
    let mut candidates: Vec<(String, bool)> = Vec::new();
    for row in &rows.rows {
        let cell = &row[idx];
        if cell.is_missing() {
            continue;
        }
        let Some(rendered) = cell.render() else {
            continue;
        };
        let value = truncate_chars(&rendered, cfg.value_truncate_len).to_string();
        if seen.insert(value.clone()) {
            candidates.push((value, cell.is_numeric()));
        }
    }

    let text_available = candidates.iter().filter(|(_, num)| !num).count();
    let numeric_available = candidates.len() - text_available;
    let text_take = text_available.min(n);
    let numeric_take = numeric_allowance(text_take, numeric_available, n, cfg.max_numeric_ratio);

    let (mut t, mut m) = (0, 0);
    let mut values = Vec::with_capacity(text_take + numeric_take);
    for (value, numeric) in candidates {
        if numeric && m < numeric_take {
            m += 1;
            values.push(value);
        } else if !numeric && t < text_take {
            t += 1;
            values.push(value);
        }
    }
    Ok(ValueSample {
        column: rows.column_order[idx].clone(),
        values,
        numeric_count: m,
    })
}
