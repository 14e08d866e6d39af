use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::EvalExample;
use crate::schema::DatabaseSchema;
use crate::sql::{extract_column_refs, parse_sql, Query};

/// Column identifiers generated in predictions (`total`) and how many of
/// them name a column of the target schema (`correct`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnCounts {
    pub correct: usize,
    pub total: usize,
}

impl ColumnCounts {
    /// `None` when nothing was counted; an empty count is not perfect accuracy.
    pub fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }

    pub fn add(&mut self, other: ColumnCounts) {
        self.correct += other.correct;
        self.total += other.total;
    }
}

/// Counts the column references of a parsed prediction. A reference is
/// correct when any table of the schema has a column of that name.
pub fn count_column_refs(pred: &Query, schema: &DatabaseSchema) -> ColumnCounts {
    let refs = extract_column_refs(pred, Some(schema));
    ColumnCounts {
        correct: refs.iter().filter(|r| schema.has_column(&r.column)).count(),
        total: refs.len(),
    }
}

/// Column accuracy over a set of examples. Unparseable predictions and
/// examples without a known schema contribute nothing.
pub fn column_accuracy(examples: &[EvalExample], schemas: &HashMap<String, DatabaseSchema>) -> ColumnCounts {
    let mut counts = ColumnCounts::default();
    for ex in examples {
        let (Some(schema), Ok(q)) = (schemas.get(&ex.db_id), parse_sql(&ex.predicted_sql)) else {
            continue;
        };
        counts.add(count_column_refs(&q, schema));
    }
    counts
}

/// Serialized form `{correct, total, rate}` with `rate: null` for 0/0.
#[derive(Serialize)]
pub(crate) struct ColumnCountsReport {
    correct: usize,
    total: usize,
    rate: Option<f64>,
}

pub(crate) fn serialize_counts<S: serde::Serializer>(c: &ColumnCounts, s: S) -> Result<S::Ok, S::Error> {
    ColumnCountsReport {
        correct: c.correct,
        total: c.total,
        rate: c.rate(),
    }
    .serialize(s)
}
