//! Knowledge-injection task generation.
//!
//! Nine task kinds, grouped into three objectives, are instantiated from
//! question/answer templates filled with schema facts and sampled cell values.
//! Every record carries enough provenance (`task_kind`, `db_id`,
//! `template_id`) to be traced back, and every generator exposes its fill
//! context so outputs can be replayed.

mod context;
mod corpus;
mod replay;
mod template;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use context::*;
pub use corpus::*;
pub use replay::*;
pub use template::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    ColumnFromValues,
    ValueClusteringByColumn,
    ValueColumnMembership,
    ColumnTypePrediction,
    TableFromRow,
    ValueClusteringByTable,
    TableFromColumns,
    ColumnClusteringByTable,
    JoinCompatibility,
}

impl TaskKind {
    pub const ALL: [TaskKind; 9] = [
        TaskKind::ColumnFromValues,
        TaskKind::ValueClusteringByColumn,
        TaskKind::ValueColumnMembership,
        TaskKind::ColumnTypePrediction,
        TaskKind::TableFromRow,
        TaskKind::ValueClusteringByTable,
        TaskKind::TableFromColumns,
        TaskKind::ColumnClusteringByTable,
        TaskKind::JoinCompatibility,
    ];

    /// 1-based task number.
    pub fn number(self) -> usize {
        Self::ALL.iter().position(|k| *k == self).unwrap() + 1
    }

    pub fn objective(self) -> Objective {
        match self.number() {
            1..=4 => Objective::ColumnSemantic,
            5 | 6 => Objective::TableSemantic,
            _ => Objective::Schema,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::ColumnFromValues => "column_from_values",
            TaskKind::ValueClusteringByColumn => "value_clustering_by_column",
            TaskKind::ValueColumnMembership => "value_column_membership",
            TaskKind::ColumnTypePrediction => "column_type_prediction",
            TaskKind::TableFromRow => "table_from_row",
            TaskKind::ValueClusteringByTable => "value_clustering_by_table",
            TaskKind::TableFromColumns => "table_from_columns",
            TaskKind::ColumnClusteringByTable => "column_clustering_by_table",
            TaskKind::JoinCompatibility => "join_compatibility",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown task kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    ColumnSemantic,
    TableSemantic,
    Schema,
}

impl Objective {
    pub const ALL: [Objective; 3] = [
        Objective::ColumnSemantic,
        Objective::TableSemantic,
        Objective::Schema,
    ];

    /// Column- and table-semantic objectives both learn from cell values.
    pub fn is_semantic(self) -> bool {
        self != Objective::Schema
    }
}

/// One Alpaca-style training record. Field order is the JSONL key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRecord {
    pub instruction: String,
    pub input: String,
    pub output: String,
    pub task_kind: TaskKind,
    pub objective: Objective,
    pub db_id: String,
    pub template_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    pub per_objective: BTreeMap<Objective, usize>,
    pub per_task_kind: BTreeMap<TaskKind, usize>,
    pub per_db: BTreeMap<String, usize>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl CorpusStats {
    pub fn new() -> Self {
        CorpusStats {
            total: 0,
            per_objective: Objective::ALL.iter().map(|o| (*o, 0)).collect(),
            per_task_kind: TaskKind::ALL.iter().map(|k| (*k, 0)).collect(),
            per_db: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a TaskRecord>) -> Self {
        let mut s = Self::new();
        for r in records {
            s.add(r);
        }
        s
    }

    pub fn add(&mut self, r: &TaskRecord) {
        self.total += 1;
        *self.per_objective.entry(r.objective).or_default() += 1;
        *self.per_task_kind.entry(r.task_kind).or_default() += 1;
        *self.per_db.entry(r.db_id.clone()).or_default() += 1;
    }

    pub fn semantic(&self) -> usize {
        self.per_objective
            .iter()
            .filter(|(o, _)| o.is_semantic())
            .map(|(_, n)| n)
            .sum()
    }

    pub fn schema(&self) -> usize {
        self.per_objective.get(&Objective::Schema).copied().unwrap_or(0)
    }

    /// semantic : schema, if any schema records exist.
    pub fn objective_ratio(&self) -> Option<f64> {
        let schema = self.schema();
        (schema > 0).then(|| self.semantic() as f64 / schema as f64)
    }

    /// True when the three breakdowns all sum to `total`.
    pub fn is_consistent(&self) -> bool {
        let s = |m: &dyn Fn() -> usize| m() == self.total;
        s(&|| self.per_objective.values().sum())
            && s(&|| self.per_task_kind.values().sum())
            && s(&|| self.per_db.values().sum())
    }

    /// Counts and checks without `warnings`.
    pub fn same_counts(&self, other: &CorpusStats) -> bool {
        self.total == other.total
            && self.per_objective == other.per_objective
            && self.per_task_kind == other.per_task_kind
            && self.per_db == other.per_db
    }
}

/// Reference totals of the published corpus: semantic and schema entries.
pub const REFERENCE_TOTAL: usize = 49_878;
pub const REFERENCE_SEMANTIC: usize = 31_924;
pub const REFERENCE_SCHEMA: usize = 17_954;

/// Default semantic : schema target, about 1.778.
pub fn reference_objective_ratio() -> f64 {
    REFERENCE_SEMANTIC as f64 / REFERENCE_SCHEMA as f64
}
