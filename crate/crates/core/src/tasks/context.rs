//! Fill contexts: everything a template needs to render one task instance.
//!
//! Generators are pure functions from schema facts, samples and a seeded RNG
//! to a [`TaskContext`]. Rendering a context through any template of the
//! matching kind yields the record, so outputs can be recomputed from the
//! context alone.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::template::{render_record, Fills, TaskTemplate, TemplateError};
use super::{TaskKind, TaskRecord};
use crate::sampler::{truncate_chars, ValueSample};
use crate::schema::{ident_eq, Cell, ColumnSchema, ForeignKey, TableSchema};

pub const YES: &str = "yes";
pub const NO: &str = "no";

impl TaskKind {
    /// Placeholder names available to templates of this kind.
    pub fn fill_names(self) -> &'static [&'static str] {
        match self {
            TaskKind::ColumnFromValues => &["db_id", "table", "column", "values"],
            TaskKind::ValueClusteringByColumn => {
                &["db_id", "table", "columns", "values", "groups", "n_groups"]
            }
            TaskKind::ValueColumnMembership => {
                &["db_id", "values", "candidate_table", "candidate_column", "label"]
            }
            TaskKind::ColumnTypePrediction => &["db_id", "table", "column", "values", "type"],
            TaskKind::TableFromRow => &["db_id", "row", "columns", "table"],
            TaskKind::ValueClusteringByTable => {
                &["db_id", "tables", "values", "groups", "n_groups"]
            }
            TaskKind::TableFromColumns => &["db_id", "columns", "table"],
            TaskKind::ColumnClusteringByTable => {
                &["db_id", "tables", "columns", "groups", "n_groups"]
            }
            TaskKind::JoinCompatibility => &[
                "db_id",
                "left_table",
                "left_columns",
                "right_table",
                "right_columns",
                "label",
            ],
        }
    }
}

/// Double-quoted, with `"` and `\` backslash-escaped.
pub fn quote_value(v: &str) -> String {
    let mut s = String::with_capacity(v.len() + 2);
    s.push('"');
    for c in v.chars() {
        if c == '"' || c == '\\' {
            s.push('\\');
        }
        s.push(c);
    }
    s.push('"');
    s
}

pub fn value_list(values: &[String]) -> String {
    values.iter().map(|v| quote_value(v)).collect::<Vec<_>>().join(", ")
}

pub fn yes_no(b: bool) -> &'static str {
    if b {
        YES
    } else {
        NO
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub name: String,
    pub items: Vec<String>,
}

/// Presented items and their ground-truth grouping for kinds 2, 6 and 8.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    /// Shuffled union shown in the prompt, each item once.
    pub presented: Vec<String>,
    pub groups: Vec<Group>,
    /// Items that occurred in more than one group before selection.
    pub ambiguous: Vec<String>,
    /// Whether ambiguous items were kept (listed under every owning group).
    pub multi_group: bool,
}

impl Clustering {
    /// Builds a clustering over `groups`. Duplicates within a group are
    /// dropped; items owned by several groups are removed unless
    /// `multi_group`. Items are taken round-robin across groups, each group
    /// shuffled first, until `max_items` distinct items are presented.
    /// Returns `None` when fewer than two non-empty groups remain.
    pub fn build<R: Rng>(
        groups: &[(String, Vec<String>)],
        multi_group: bool,
        max_items: usize,
        rng: &mut R,
    ) -> Option<Clustering> {
        let mut owners: HashMap<String, usize> = HashMap::new();
        let mut deduped: Vec<(String, Vec<String>)> = Vec::new();
        for (name, items) in groups {
            let mut seen = std::collections::HashSet::new();
            let items: Vec<String> = items.iter().filter(|i| seen.insert(i.as_str())).cloned().collect();
            for i in &items {
                *owners.entry(i.clone()).or_default() += 1;
            }
            deduped.push((name.clone(), items));
        }
        let mut ambiguous: Vec<String> = owners
            .iter()
            .filter(|(_, n)| **n > 1)
            .map(|(i, _)| i.clone())
            .collect();
        ambiguous.sort();

        let mut pools: Vec<(String, Vec<String>)> = deduped
            .into_iter()
            .map(|(name, items)| {
                let mut items: Vec<String> = if multi_group {
                    items
                } else {
                    items.into_iter().filter(|i| ambiguous.binary_search(i).is_err()).collect()
                };
                items.shuffle(rng);
                (name, items)
            })
            .filter(|(_, items)| !items.is_empty())
            .collect();
        if pools.len() < 2 || max_items < 2 {
            return None;
        }
        pools.truncate(max_items);

        let mut presented: Vec<String> = Vec::new();
        let mut chosen = std::collections::HashSet::new();
        let mut cursor = vec![0usize; pools.len()];
        'fill: loop {
            let mut progressed = false;
            for (g, (_, items)) in pools.iter().enumerate() {
                if presented.len() >= max_items {
                    break 'fill;
                }
                while cursor[g] < items.len() {
                    let item = &items[cursor[g]];
                    cursor[g] += 1;
                    if chosen.insert(item.clone()) {
                        presented.push(item.clone());
                        progressed = true;
                        break;
                    }
                }
            }
            if !progressed {
                break;
            }
        }

        let groups: Vec<Group> = pools
            .iter()
            .map(|(name, items)| Group {
                name: name.clone(),
                items: items.iter().filter(|i| chosen.contains(*i)).cloned().collect(),
            })
            .collect();
        presented.shuffle(rng);
        Some(Clustering {
            presented,
            groups,
            ambiguous,
            multi_group,
        })
    }

    /// Checks that groups cover the presented items exactly: every presented
    /// item in some group, group items presented and distinct, and each item
    /// in exactly one group unless `multi_group`.
    pub fn partition_problems(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut count: BTreeMap<&str, usize> = self.presented.iter().map(|p| (p.as_str(), 0)).collect();
        if count.len() != self.presented.len() {
            problems.push("presented items repeat".to_string());
        }
        for g in &self.groups {
            let mut seen = std::collections::HashSet::new();
            for i in &g.items {
                if !seen.insert(i) {
                    problems.push(format!("`{i}` repeated in group {}", g.name));
                }
                match count.get_mut(i.as_str()) {
                    Some(n) => *n += 1,
                    None => problems.push(format!("`{i}` in group {} was not presented", g.name)),
                }
            }
        }
        for (item, n) in count {
            if n == 0 {
                problems.push(format!("`{item}` is in no group"));
            } else if n > 1 && !self.multi_group {
                problems.push(format!("`{item}` is in {n} groups"));
            }
        }
        problems
    }
}

/// Fill context of one task instance, tagged by task kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task_kind", rename_all = "snake_case")]
pub enum TaskContext {
    ColumnFromValues {
        table: String,
        column: String,
        values: Vec<String>,
    },
    ValueClusteringByColumn {
        table: String,
        clustering: Clustering,
    },
    ValueColumnMembership {
        table: String,
        column: String,
        values: Vec<String>,
        candidate_table: String,
        candidate_column: String,
    },
    ColumnTypePrediction {
        table: String,
        column: String,
        type_word: String,
        values: Vec<String>,
    },
    TableFromRow {
        table: String,
        cells: Vec<(String, String)>,
    },
    ValueClusteringByTable {
        clustering: Clustering,
    },
    TableFromColumns {
        table: String,
        columns: Vec<String>,
    },
    ColumnClusteringByTable {
        clustering: Clustering,
    },
    JoinCompatibility {
        left_table: String,
        left_columns: Vec<String>,
        right_table: String,
        right_columns: Vec<String>,
        linked: bool,
    },
}

impl TaskContext {
    pub fn kind(&self) -> TaskKind {
        match self {
            TaskContext::ColumnFromValues { .. } => TaskKind::ColumnFromValues,
            TaskContext::ValueClusteringByColumn { .. } => TaskKind::ValueClusteringByColumn,
            TaskContext::ValueColumnMembership { .. } => TaskKind::ValueColumnMembership,
            TaskContext::ColumnTypePrediction { .. } => TaskKind::ColumnTypePrediction,
            TaskContext::TableFromRow { .. } => TaskKind::TableFromRow,
            TaskContext::ValueClusteringByTable { .. } => TaskKind::ValueClusteringByTable,
            TaskContext::TableFromColumns { .. } => TaskKind::TableFromColumns,
            TaskContext::ColumnClusteringByTable { .. } => TaskKind::ColumnClusteringByTable,
            TaskContext::JoinCompatibility { .. } => TaskKind::JoinCompatibility,
        }
    }

    pub fn clustering(&self) -> Option<&Clustering> {
        match self {
            TaskContext::ValueClusteringByColumn { clustering, .. }
            | TaskContext::ValueClusteringByTable { clustering }
            | TaskContext::ColumnClusteringByTable { clustering } => Some(clustering),
            _ => None,
        }
    }

    /// The kind-3 / kind-9 binary label.
    pub fn label(&self) -> Option<bool> {
        match self {
            TaskContext::ValueColumnMembership {
                table,
                column,
                candidate_table,
                candidate_column,
                ..
            } => Some(ident_eq(table, candidate_table) && ident_eq(column, candidate_column)),
            TaskContext::JoinCompatibility { linked, .. } => Some(*linked),
            _ => None,
        }
    }

    pub fn fills(&self, db_id: &str) -> Fills {
        let mut f = Fills::new();
        let mut put = |k: &str, v: String| {
            f.insert(k.to_string(), v);
        };
        put("db_id", db_id.to_string());
        match self {
            TaskContext::ColumnFromValues {
                table,
                column,
                values,
            } => {
                put("table", table.clone());
                put("column", column.clone());
                put("values", value_list(values));
            }
            TaskContext::ValueClusteringByColumn { table, clustering } => {
                put("table", table.clone());
                put("columns", group_names(clustering));
                put("values", value_list(&clustering.presented));
                put("groups", value_groups(clustering));
                put("n_groups", clustering.groups.len().to_string());
            }
            TaskContext::ValueColumnMembership {
                values,
                candidate_table,
                candidate_column,
                ..
            } => {
                put("values", value_list(values));
                put("candidate_table", candidate_table.clone());
                put("candidate_column", candidate_column.clone());
                put("label", yes_no(self.label().unwrap()).to_string());
            }
            TaskContext::ColumnTypePrediction {
                table,
                column,
                type_word,
                values,
            } => {
                put("table", table.clone());
                put("column", column.clone());
                put("values", value_list(values));
                put("type", type_word.clone());
            }
            TaskContext::TableFromRow { table, cells } => {
                put("table", table.clone());
                put(
                    "row",
                    cells
                        .iter()
                        .map(|(c, v)| format!("{c}: {}", quote_value(v)))
                        .collect::<Vec<_>>()
                        .join(", "),
                );
                put(
                    "columns",
                    cells.iter().map(|(c, _)| c.as_str()).collect::<Vec<_>>().join(", "),
                );
            }
            TaskContext::ValueClusteringByTable { clustering } => {
                put("tables", group_names(clustering));
                put("values", value_list(&clustering.presented));
                put("groups", value_groups(clustering));
                put("n_groups", clustering.groups.len().to_string());
            }
            TaskContext::TableFromColumns { table, columns } => {
                put("table", table.clone());
                put("columns", columns.join(", "));
            }
            TaskContext::ColumnClusteringByTable { clustering } => {
                put("tables", group_names(clustering));
                put("columns", clustering.presented.join(", "));
                put(
                    "groups",
                    clustering
                        .groups
                        .iter()
                        .map(|g| format!("{} FROM {}", g.items.join(", "), g.name))
                        .collect::<Vec<_>>()
                        .join("\n"),
                );
                put("n_groups", clustering.groups.len().to_string());
            }
            TaskContext::JoinCompatibility {
                left_table,
                left_columns,
                right_table,
                right_columns,
                linked,
            } => {
                put("left_table", left_table.clone());
                put("left_columns", left_columns.join(", "));
                put("right_table", right_table.clone());
                put("right_columns", right_columns.join(", "));
                put("label", yes_no(*linked).to_string());
            }
        }
        f
    }

    /// Renders this context through `tpl`, which must be of the same kind.
    pub fn render(&self, tpl: &TaskTemplate, db_id: &str) -> Result<TaskRecord, TemplateError> {
        debug_assert_eq!(tpl.task_kind(), self.kind());
        render_record(tpl, &self.fills(db_id), db_id)
    }
}

fn group_names(c: &Clustering) -> String {
    c.groups.iter().map(|g| g.name.as_str()).collect::<Vec<_>>().join(", ")
}

fn value_groups(c: &Clustering) -> String {
    c.groups
        .iter()
        .map(|g| format!("{}: {}", g.name, value_list(&g.items)))
        .collect::<Vec<_>>()
        .join("\n")
}

fn column_names(t: &TableSchema) -> Vec<String> {
    t.columns.iter().map(|c| c.name.clone()).collect()
}

// Kind 1.
pub fn gen_col_from_values(table: &str, col: &ColumnSchema, sample: &ValueSample) -> TaskContext {
    TaskContext::ColumnFromValues {
        table: table.to_string(),
        column: col.name.clone(),
        values: sample.values.clone(),
    }
}

// Kind 2. `samples` are the per-column samples of one table.
pub fn gen_value_clustering_by_column<R: Rng>(
    table: &str,
    samples: &[ValueSample],
    multi_group: bool,
    max_items: usize,
    rng: &mut R,
) -> Option<TaskContext> {
    let groups: Vec<(String, Vec<String>)> = samples
        .iter()
        .map(|s| (s.column.clone(), s.values.clone()))
        .collect();
    Clustering::build(&groups, multi_group, max_items, rng).map(|clustering| {
        TaskContext::ValueClusteringByColumn {
            table: table.to_string(),
            clustering,
        }
    })
}

// Kind 3. The label is whether the candidate is the sample's own column.
pub fn gen_value_column_membership(
    table: &str,
    sample: &ValueSample,
    candidate_table: &str,
    candidate: &ColumnSchema,
) -> TaskContext {
    TaskContext::ValueColumnMembership {
        table: table.to_string(),
        column: sample.column.clone(),
        values: sample.values.clone(),
        candidate_table: candidate_table.to_string(),
        candidate_column: candidate.name.clone(),
    }
}

// Kind 4.
pub fn gen_column_type_prediction(table: &str, col: &ColumnSchema, sample: &ValueSample) -> TaskContext {
    TaskContext::ColumnTypePrediction {
        table: table.to_string(),
        column: col.name.clone(),
        type_word: col.declared_type.sql_word().to_string(),
        values: sample.values.clone(),
    }
}

// Kind 5. Missing and blob cells are left out; `None` if nothing remains.
pub fn gen_table_from_row(
    table: &TableSchema,
    column_order: &[String],
    row: &[Cell],
    truncate_len: usize,
) -> Option<TaskContext> {
    let cells: Vec<(String, String)> = column_order
        .iter()
        .zip(row)
        .filter(|(_, cell)| !cell.is_missing())
        .filter_map(|(c, cell)| {
            cell.render()
                .map(|v| (c.clone(), truncate_chars(&v, truncate_len).to_string()))
        })
        .collect();
    (!cells.is_empty()).then(|| TaskContext::TableFromRow {
        table: table.name.clone(),
        cells,
    })
}

// Kind 6. `per_table` maps table names to their value pools.
pub fn gen_value_clustering_by_table<R: Rng>(
    per_table: &[(String, Vec<String>)],
    multi_group: bool,
    max_items: usize,
    rng: &mut R,
) -> Option<TaskContext> {
    Clustering::build(per_table, multi_group, max_items, rng)
        .map(|clustering| TaskContext::ValueClusteringByTable { clustering })
}

// Kind 7.
pub fn gen_table_from_columns(cols: &[String], table: &TableSchema) -> TaskContext {
    TaskContext::TableFromColumns {
        table: table.name.clone(),
        columns: cols.to_vec(),
    }
}

// Kind 8. Column names shared by several tables are listed under each.
pub fn gen_column_clustering_by_table<R: Rng>(
    tables: &[&TableSchema],
    max_items: usize,
    rng: &mut R,
) -> Option<TaskContext> {
    let groups: Vec<(String, Vec<String>)> =
        tables.iter().map(|t| (t.name.clone(), column_names(t))).collect();
    Clustering::build(&groups, true, max_items, rng)
        .map(|clustering| TaskContext::ColumnClusteringByTable { clustering })
}

// Kind 9. Positive iff some foreign key links the two tables directly.
pub fn gen_join_compatibility(t1: &TableSchema, t2: &TableSchema, fks: &[ForeignKey]) -> TaskContext {
    TaskContext::JoinCompatibility {
        left_table: t1.name.clone(),
        left_columns: column_names(t1),
        right_table: t2.name.clone(),
        right_columns: column_names(t2),
        linked: fks.iter().any(|fk| fk.links(&t1.name, &t2.name)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::DeclaredType;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn col(name: &str, ty: DeclaredType) -> ColumnSchema {
        ColumnSchema {
            name: name.into(),
            declared_type: ty,
            nullable: true,
        }
    }

    fn sample(column: &str, values: &[&str]) -> ValueSample {
        ValueSample {
            column: column.into(),
            values: values.iter().map(|v| v.to_string()).collect(),
            numeric_count: 0,
        }
    }

    fn table(name: &str, cols: &[&str]) -> TableSchema {
        TableSchema {
            name: name.into(),
            columns: cols.iter().map(|c| col(c, DeclaredType::Text)).collect(),
            primary_key: vec![],
            foreign_keys: vec![],
        }
    }

    fn render_first(ctx: &TaskContext) -> TaskRecord {
        let pack = super::super::TemplatePack::builtin();
        ctx.render(pack.pick(ctx.kind(), 0).unwrap(), "db").unwrap()
    }

    #[test]
    fn state_values_name_the_state_column() {
        let ctx = gen_col_from_values("addr", &col("state", DeclaredType::Text), &sample("state", &["Texas", "NY"]));
        let r = render_first(&ctx);
        assert_eq!(r.output, "state");
        assert!(r.instruction.contains("\"Texas\", \"NY\""), "{}", r.instruction);
    }

    #[test]
    fn membership_labels() {
        let s = sample("state", &["Texas"]);
        let pos = gen_value_column_membership("addr", &s, "addr", &col("state", DeclaredType::Text));
        let neg = gen_value_column_membership("addr", &s, "people", &col("weight", DeclaredType::Real));
        assert_eq!(render_first(&pos).output, "yes");
        assert_eq!(render_first(&neg).output, "no");
    }

    #[test]
    fn type_words() {
        let s = sample("x", &["1"]);
        for (ty, word) in [
            (DeclaredType::Integer, "INT"),
            (DeclaredType::Text, "TEXT"),
            (DeclaredType::from_raw("NUMERIC(10,2)"), "NUMERIC(10,2)"),
        ] {
            assert_eq!(render_first(&gen_column_type_prediction("t", &col("x", ty), &s)).output, word);
        }
    }

    #[test]
    fn row_omits_nulls() {
        let t = table("pets", &["petid", "pettype", "weight"]);
        let order: Vec<String> = t.columns.iter().map(|c| c.name.clone()).collect();
        let ctx = gen_table_from_row(&t, &order, &[Cell::Int(1), Cell::Null, Cell::Real(12.5)], 64).unwrap();
        let r = render_first(&ctx);
        let shown = format!("{}\n{}", r.instruction, r.input);
        assert_eq!(r.output, "pets");
        assert!(!shown.contains("pettype"));
        assert!(shown.contains("weight: \"12.5\""), "{shown}");
        assert!(gen_table_from_row(&t, &order, &[Cell::Null, Cell::Null, Cell::Null], 64).is_none());
    }

    #[test]
    fn table_from_columns_is_sql_style() {
        let t = table("Dogs", &["dog_id", "date_arrived", "date_departed"]);
        let ctx = gen_table_from_columns(&["date_arrived".into(), "date_departed".into()], &t);
        assert_eq!(render_first(&ctx).output, "date_arrived, date_departed FROM Dogs");
    }

    #[test]
    fn airline_clustering() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ctx = gen_value_clustering_by_column(
            "airlines",
            &[
                sample("Airline", &["JetBlue Airways", "United Airlines"]),
                sample("Country", &["USA"]),
            ],
            false,
            24,
            &mut rng,
        )
        .unwrap();
        let c = ctx.clustering().unwrap();
        assert!(c.partition_problems().is_empty());
        let airline = c.groups.iter().find(|g| g.name == "Airline").unwrap();
        assert!(airline.items.contains(&"JetBlue Airways".to_string()));
        assert!(render_first(&ctx).output.contains("Airline: \"JetBlue Airways\""));
    }

    #[test]
    fn collisions_excluded_or_shared() {
        let groups = vec![
            ("a".to_string(), vec!["x".to_string(), "shared".to_string()]),
            ("b".to_string(), vec!["y".to_string(), "shared".to_string()]),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = Clustering::build(&groups, false, 24, &mut rng).unwrap();
        assert_eq!(c.ambiguous, vec!["shared"]);
        assert!(!c.presented.contains(&"shared".to_string()));
        assert!(c.partition_problems().is_empty());

        let c = Clustering::build(&groups, true, 24, &mut rng).unwrap();
        assert_eq!(c.presented.iter().filter(|p| *p == "shared").count(), 1);
        assert!(c.groups.iter().all(|g| g.items.contains(&"shared".to_string())));
        assert!(c.partition_problems().is_empty());
    }

    #[test]
    fn too_few_groups() {
        let groups = vec![
            ("a".to_string(), vec!["same".to_string()]),
            ("b".to_string(), vec!["same".to_string()]),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(Clustering::build(&groups, false, 24, &mut rng).is_none());
    }

    #[test]
    fn presented_items_capped() {
        let groups: Vec<(String, Vec<String>)> = (0..3)
            .map(|g| (format!("g{g}"), (0..20).map(|i| format!("v{g}_{i}")).collect()))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = Clustering::build(&groups, false, 24, &mut rng).unwrap();
        assert_eq!(c.presented.len(), 24);
        assert!(c.groups.iter().all(|g| g.items.len() == 8));
    }

    #[test]
    fn shared_column_names_listed_under_both() {
        let dogs = table("Dogs", &["dog_id", "name"]);
        let owners = table("Owners", &["owner_id", "name"]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ctx = gen_column_clustering_by_table(&[&dogs, &owners], 24, &mut rng).unwrap();
        let out = render_first(&ctx).output;
        for line in out.lines() {
            assert!(line.contains("name"), "{out}");
        }
        assert!(out.contains("FROM Dogs") && out.contains("FROM Owners"));
    }

    #[test]
    fn join_labels_either_direction() {
        let dogs = table("Dogs", &["dog_id", "owner_id"]);
        let owners = table("Owners", &["owner_id"]);
        let sizes = table("Sizes", &["size_code"]);
        let fks = vec![ForeignKey {
            from_table: "Dogs".into(),
            from_column: "owner_id".into(),
            to_table: "Owners".into(),
            to_column: "owner_id".into(),
        }];
        assert_eq!(render_first(&gen_join_compatibility(&owners, &dogs, &fks)).output, "yes");
        assert_eq!(render_first(&gen_join_compatibility(&dogs, &sizes, &fks)).output, "no");
    }

    #[test]
    fn quoting_escapes() {
        assert_eq!(quote_value(r#"a "b" \c"#), r#""a \"b\" \\c""#);
    }
}
