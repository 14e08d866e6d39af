//! Re-derives every record from its fill context and re-checks labels,
//! partitions and schema facts against the databases.

use std::collections::HashMap;

use serde::Serialize;

use super::context::TaskContext;
use super::template::TemplatePack;
use super::{CorpusStats, TaskRecord};
use crate::schema::{ident_eq, DatabaseSchema, TableSchema};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReplayFailure {
    pub index: usize,
    pub problem: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReplayReport {
    pub checked: usize,
    /// Records whose instruction, input and output were reproduced exactly.
    pub rederived: usize,
    pub failures: Vec<ReplayFailure>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.failures.is_empty() && self.rederived == self.checked
    }
}

/// Checks each record against its context. `schemas` supplies the
/// databases the records refer to.
pub fn replay_corpus(
    records: &[TaskRecord],
    contexts: &[TaskContext],
    pack: &TemplatePack,
    schemas: &[DatabaseSchema],
) -> ReplayReport {
    let by_id: HashMap<&str, &DatabaseSchema> = schemas.iter().map(|s| (s.db_id.as_str(), s)).collect();
    let mut report = ReplayReport::default();
    if records.len() != contexts.len() {
        report.failures.push(ReplayFailure {
            index: records.len().min(contexts.len()),
            problem: format!("{} records but {} contexts", records.len(), contexts.len()),
        });
    }
    for (i, (rec, ctx)) in records.iter().zip(contexts).enumerate() {
        report.checked += 1;
        let mut problems = Vec::new();
        if check_record(rec, ctx, pack, &mut problems) {
            report.rederived += 1;
        }
        match by_id.get(rec.db_id.as_str()) {
            Some(schema) => check_schema(rec, ctx, schema, &mut problems),
            None => problems.push(format!("unknown database `{}`", rec.db_id)),
        }
        report
            .failures
            .extend(problems.into_iter().map(|problem| ReplayFailure { index: i, problem }));
    }
    report
}

/// Re-renders the record; true when it reproduces exactly.
fn check_record(rec: &TaskRecord, ctx: &TaskContext, pack: &TemplatePack, problems: &mut Vec<String>) -> bool {
    if rec.output.is_empty() {
        problems.push("empty output".into());
    }
    if rec.objective != rec.task_kind.objective() {
        problems.push(format!("objective {:?} does not match {}", rec.objective, rec.task_kind));
    }
    if ctx.kind() != rec.task_kind {
        problems.push(format!("context is {} but record is {}", ctx.kind(), rec.task_kind));
        return false;
    }
    let Some(tpl) = pack.get(&rec.template_id) else {
        problems.push(format!("unknown template `{}`", rec.template_id));
        return false;
    };
    if tpl.task_kind() != rec.task_kind {
        problems.push(format!("template `{}` is not a {} template", rec.template_id, rec.task_kind));
        return false;
    }
    match ctx.render(tpl, &rec.db_id) {
        Ok(again) if &again == rec => true,
        Ok(again) => {
            if again.output != rec.output {
                problems.push(format!("output `{}` re-derives as `{}`", rec.output, again.output));
            } else {
                problems.push("instruction or input differs on re-rendering".into());
            }
            false
        }
        Err(e) => {
            problems.push(format!("re-rendering failed: {e}"));
            false
        }
    }
}

fn table<'s>(schema: &'s DatabaseSchema, name: &str, problems: &mut Vec<String>) -> Option<&'s TableSchema> {
    let t = schema.table(name);
    if t.is_none() {
        problems.push(format!("unknown table `{name}`"));
    }
    t
}

fn columns_exist(t: &TableSchema, cols: &[String], problems: &mut Vec<String>) {
    for c in cols {
        if t.column(c).is_none() {
            problems.push(format!("table `{}` has no column `{c}`", t.name));
        }
    }
}

fn check_schema(rec: &TaskRecord, ctx: &TaskContext, schema: &DatabaseSchema, problems: &mut Vec<String>) {
    if let Some(c) = ctx.clustering() {
        problems.extend(c.partition_problems());
        if !c.multi_group {
            if let Some(a) = c.presented.iter().find(|p| c.ambiguous.contains(p)) {
                problems.push(format!("ambiguous item `{a}` presented"));
            }
        }
    }
    match ctx {
        TaskContext::ColumnFromValues { table: t, column, .. }
        | TaskContext::ValueColumnMembership { table: t, column, .. } => {
            if let Some(t) = table(schema, t, problems) {
                columns_exist(t, std::slice::from_ref(column), problems);
            }
            if let TaskContext::ValueColumnMembership {
                candidate_table,
                candidate_column,
                ..
            } = ctx
            {
                if let Some(t) = table(schema, candidate_table, problems) {
                    columns_exist(t, std::slice::from_ref(candidate_column), problems);
                }
                let want = ctx.label().unwrap();
                let is_same = candidate_table.eq_ignore_ascii_case(match ctx {
                    TaskContext::ValueColumnMembership { table, .. } => table,
                    _ => unreachable!(),
                }) && ident_eq(candidate_column, column);
                if want != is_same {
                    problems.push("membership label disagrees with the candidate column".into());
                }
            }
        }
        TaskContext::ColumnTypePrediction {
            table: t,
            column,
            type_word,
            ..
        } => {
            if let Some(c) = table(schema, t, problems).and_then(|t| t.column(column)) {
                if c.declared_type.sql_word() != type_word {
                    problems.push(format!(
                        "type of `{column}` is {} not {type_word}",
                        c.declared_type.sql_word()
                    ));
                }
            } else {
                problems.push(format!("unknown column `{t}.{column}`"));
            }
        }
        TaskContext::TableFromRow { table: t, cells } => {
            if let Some(t) = table(schema, t, problems) {
                let cols: Vec<String> = cells.iter().map(|(c, _)| c.clone()).collect();
                columns_exist(t, &cols, problems);
            }
        }
        TaskContext::ValueClusteringByColumn { table: t, clustering } => {
            if let Some(t) = table(schema, t, problems) {
                let cols: Vec<String> = clustering.groups.iter().map(|g| g.name.clone()).collect();
                columns_exist(t, &cols, problems);
            }
        }
        TaskContext::ValueClusteringByTable { clustering } => {
            for g in &clustering.groups {
                table(schema, &g.name, problems);
            }
        }
        TaskContext::TableFromColumns { table: t, columns } => {
            if let Some(t) = table(schema, t, problems) {
                columns_exist(t, columns, problems);
            }
            check_cooccurrence(&rec.output, &[(t.clone(), columns.clone())], problems);
        }
        TaskContext::ColumnClusteringByTable { clustering } => {
            for g in &clustering.groups {
                if let Some(t) = table(schema, &g.name, problems) {
                    columns_exist(t, &g.items, problems);
                    // Every presented column the table owns must be listed.
                    for p in &clustering.presented {
                        if t.column(p).is_some() && !g.items.contains(p) {
                            problems.push(format!("`{p}` missing from group `{}`", g.name));
                        }
                    }
                }
            }
            let groups: Vec<(String, Vec<String>)> =
                clustering.groups.iter().map(|g| (g.name.clone(), g.items.clone())).collect();
            check_cooccurrence(&rec.output, &groups, problems);
        }
        TaskContext::JoinCompatibility {
            left_table,
            left_columns,
            right_table,
            right_columns,
            linked,
        } => {
            for (name, cols) in [(left_table, left_columns), (right_table, right_columns)] {
                if let Some(t) = table(schema, name, problems) {
                    let actual: Vec<&str> = t.columns.iter().map(|c| c.name.as_str()).collect();
                    if actual != cols.iter().map(|s| s.as_str()).collect::<Vec<_>>() {
                        problems.push(format!("column list of `{name}` differs from the schema"));
                    }
                }
            }
            if schema.tables_linked(left_table, right_table) != *linked {
                problems.push(format!(
                    "join label for {left_table}/{right_table} disagrees with the foreign keys"
                ));
            }
        }
    }
}

/// Every output line naming columns must have the form
/// `<columns> FROM <table>` with all columns owned by that table.
fn check_cooccurrence(output: &str, groups: &[(String, Vec<String>)], problems: &mut Vec<String>) {
    for line in output.lines() {
        let Some((cols, t)) = line.rsplit_once(" FROM ") else {
            problems.push(format!("line `{line}` does not name its table"));
            continue;
        };
        let Some((_, owned)) = groups.iter().find(|(name, _)| name == t.trim()) else {
            problems.push(format!("line `{line}` names an unexpected table"));
            continue;
        };
        for c in cols.split(", ") {
            if !owned.iter().any(|o| o == c.trim()) {
                problems.push(format!("`{c}` is listed under `{t}` but belongs elsewhere"));
            }
        }
    }
}

/// Stats recomputed from records must match the reported counts.
pub fn stats_match(records: &[TaskRecord], stats: &CorpusStats) -> bool {
    CorpusStats::from_records(records).same_counts(stats) && stats.is_consistent()
}
