//! Corpus generation: database preparation, quota planning and the
//! per-database, per-kind instance streams.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::context::*;
use super::template::{TemplateError, TemplatePack};
use super::{reference_objective_ratio, CorpusStats, TaskKind, TaskRecord};
use crate::sampler::{build_subtable, sample_cell_values, SamplerConfig, SubTable, ValueSample};
use crate::schema::{fetch_rows_with, ident_eq, open_database, DatabaseSchema, SchemaError};

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("invalid generation config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub seed: u64,
    /// Instances per task kind per database, unless overridden in `quotas`.
    pub default_quota: usize,
    pub quotas: BTreeMap<TaskKind, usize>,
    /// Rescale schema-task quotas so that semantic : schema hits
    /// `objective_ratio` over the whole corpus.
    pub balance_objectives: bool,
    pub objective_ratio: f64,
    /// Values per column sample.
    pub values_per_sample: usize,
    pub min_table_columns: usize,
    pub max_table_columns: usize,
    /// Cap on items shown by a clustering task.
    pub max_presented_items: usize,
    /// Cap on columns or tables mixed into one clustering task.
    pub max_groups: usize,
    /// Share of positive kind-3 instances.
    pub membership_balance: f64,
    /// Keep values found in several groups of kinds 2 and 6, listed under each.
    pub include_collisions: bool,
    /// Rows read per table before clustering; `0` reads everything.
    pub row_fetch_limit: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            seed: 0,
            default_quota: 32,
            quotas: BTreeMap::new(),
            balance_objectives: true,
            objective_ratio: reference_objective_ratio(),
            values_per_sample: 6,
            min_table_columns: 2,
            max_table_columns: 8,
            max_presented_items: 24,
            max_groups: 4,
            membership_balance: 0.5,
            include_collisions: false,
            row_fetch_limit: 20_000,
        }
    }
}

impl GenerationConfig {
    pub fn quota(&self, kind: TaskKind) -> usize {
        self.quotas.get(&kind).copied().unwrap_or(self.default_quota)
    }

    /// Same quota for every kind, no objective balancing.
    pub fn uniform(seed: u64, quota: usize) -> Self {
        GenerationConfig {
            seed,
            default_quota: quota,
            balance_objectives: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.objective_ratio.is_finite() && self.objective_ratio > 0.0) {
            return Err(format!("objective_ratio must be positive, got {}", self.objective_ratio));
        }
        if self.values_per_sample == 0 {
            return Err("values_per_sample must be at least 1".into());
        }
        if self.min_table_columns == 0 || self.min_table_columns > self.max_table_columns {
            return Err(format!(
                "need 1 <= min_table_columns <= max_table_columns, got {} and {}",
                self.min_table_columns, self.max_table_columns
            ));
        }
        if self.max_presented_items < 2 || self.max_groups < 2 {
            return Err("max_presented_items and max_groups must be at least 2".into());
        }
        if !(0.0..=1.0).contains(&self.membership_balance) {
            return Err(format!("membership_balance must lie in [0, 1], got {}", self.membership_balance));
        }
        Ok(())
    }
}

/// Sampled content of one table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableKnowledge {
    /// `None` when no rows could be read.
    pub subtable: Option<SubTable>,
    /// One sample per schema column, in column order.
    pub samples: Vec<ValueSample>,
}

/// A schema plus everything sampled from its rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DatabaseKnowledge {
    pub schema: DatabaseSchema,
    pub tables: Vec<TableKnowledge>,
}

impl DatabaseKnowledge {
    /// Schema only; semantic tasks are then infeasible.
    pub fn schema_only(schema: DatabaseSchema) -> Self {
        let tables = schema
            .tables
            .iter()
            .map(|t| TableKnowledge {
                subtable: None,
                samples: t
                    .columns
                    .iter()
                    .map(|c| ValueSample {
                        column: c.name.clone(),
                        values: Vec::new(),
                        numeric_count: 0,
                    })
                    .collect(),
            })
            .collect();
        DatabaseKnowledge { schema, tables }
    }

    pub fn from_subtables(schema: DatabaseSchema, subtables: Vec<Option<SubTable>>, sampler: &SamplerConfig, n: usize) -> Self {
        let tables = schema
            .tables
            .iter()
            .zip(subtables)
            .map(|(t, sub)| {
                let samples = t
                    .columns
                    .iter()
                    .map(|c| match &sub {
                        Some(s) => sample_cell_values(&s.as_row_set(), &c.name, n, sampler)
                            .expect("subtable has every schema column"),
                        None => ValueSample {
                            column: c.name.clone(),
                            values: Vec::new(),
                            numeric_count: 0,
                        },
                    })
                    .collect();
                TableKnowledge { subtable: sub, samples }
            })
            .collect();
        DatabaseKnowledge { schema, tables }
    }
}

/// Reads rows, builds subtables and column samples. Schemas without a
/// database file yield schema-only knowledge.
pub fn prepare_database(
    schema: DatabaseSchema,
    sampler: &SamplerConfig,
    cfg: &GenerationConfig,
) -> Result<DatabaseKnowledge, SchemaError> {
    let Some(path) = schema.db_path() else {
        return Ok(DatabaseKnowledge::schema_only(schema));
    };
    let conn = open_database(path)?;
    let limit = (cfg.row_fetch_limit > 0).then_some(cfg.row_fetch_limit);
    let mut subtables = Vec::with_capacity(schema.tables.len());
    for t in &schema.tables {
        let rows = fetch_rows_with(&conn, &schema, &t.name, limit)?;
        subtables.push((!rows.is_empty()).then(|| build_subtable(&rows, sampler)));
    }
    Ok(DatabaseKnowledge::from_subtables(schema, subtables, sampler, cfg.values_per_sample))
}

/// Stream seed of one database, from the global seed and the database id.
pub fn db_seed(global_seed: u64, db_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(global_seed.to_le_bytes());
    h.update(db_id.as_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

fn kind_rng(db_seed: u64, kind: TaskKind) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(db_seed.to_le_bytes());
    h.update(kind.name().as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Visits items in shuffled order, reshuffling after each full pass.
struct Cycler {
    order: Vec<usize>,
    pos: usize,
}

impl Cycler {
    fn new(n: usize) -> Self {
        Cycler {
            order: (0..n).collect(),
            pos: n,
        }
    }

    fn next<R: Rng>(&mut self, rng: &mut R) -> usize {
        if self.pos >= self.order.len() {
            self.order.shuffle(rng);
            self.pos = 0;
        }
        self.pos += 1;
        self.order[self.pos - 1]
    }
}

/// Candidate material for each task kind of one database.
struct Candidates<'a> {
    k: &'a DatabaseKnowledge,
    /// (table, column) with a non-empty sample.
    cells: Vec<(usize, usize)>,
    /// Per table: columns usable in value clustering.
    cluster_columns: Vec<Vec<usize>>,
    /// Tables with at least two usable clustering columns.
    cluster_tables: Vec<usize>,
    /// Kind-5 contexts, one per renderable subtable row.
    rows: Vec<TaskContext>,
    /// Per-table value pools and the tables usable in kind 6.
    pools: Vec<Vec<String>>,
    pool_tables: Vec<usize>,
    /// Tables with at least one column.
    column_tables: Vec<usize>,
}

impl<'a> Candidates<'a> {
    fn new(k: &'a DatabaseKnowledge, cfg: &GenerationConfig, truncate_len: usize) -> Self {
        let mut cells = Vec::new();
        let mut cluster_columns = Vec::new();
        for (ti, tk) in k.tables.iter().enumerate() {
            for (ci, s) in tk.samples.iter().enumerate() {
                if !s.values.is_empty() {
                    cells.push((ti, ci));
                }
            }
            cluster_columns.push(usable_groups(
                &tk.samples.iter().map(|s| s.values.clone()).collect::<Vec<_>>(),
                cfg.include_collisions,
            ));
        }
        let cluster_tables = (0..k.tables.len()).filter(|&t| cluster_columns[t].len() >= 2).collect();

        let mut rows = Vec::new();
        for (t, tk) in k.schema.tables.iter().zip(&k.tables) {
            if let Some(sub) = &tk.subtable {
                rows.extend(
                    sub.rows
                        .iter()
                        .filter_map(|r| gen_table_from_row(t, &sub.column_order, r, truncate_len)),
                );
            }
        }

        let pools: Vec<Vec<String>> = k
            .tables
            .iter()
            .map(|tk| {
                let mut seen = HashSet::new();
                tk.samples
                    .iter()
                    .flat_map(|s| s.values.iter())
                    .filter(|v| seen.insert(v.as_str()))
                    .cloned()
                    .collect()
            })
            .collect();
        let pool_tables = usable_groups(&pools, cfg.include_collisions);
        let column_tables = (0..k.schema.tables.len())
            .filter(|&t| !k.schema.tables[t].columns.is_empty())
            .collect();

        Candidates {
            k,
            cells,
            cluster_columns,
            cluster_tables,
            rows,
            pools,
            pool_tables,
            column_tables,
        }
    }

    fn feasible(&self, kind: TaskKind) -> bool {
        match kind {
            TaskKind::ColumnFromValues | TaskKind::ValueColumnMembership | TaskKind::ColumnTypePrediction => {
                !self.cells.is_empty()
            }
            TaskKind::ValueClusteringByColumn => !self.cluster_tables.is_empty(),
            TaskKind::TableFromRow => !self.rows.is_empty(),
            TaskKind::ValueClusteringByTable => self.pool_tables.len() >= 2,
            TaskKind::TableFromColumns => !self.column_tables.is_empty(),
            TaskKind::ColumnClusteringByTable => self.column_tables.len() >= 2,
            TaskKind::JoinCompatibility => self.k.schema.tables.len() >= 2,
        }
    }
}

/// Indices of groups that keep at least one item once items shared with
/// other groups are removed (or of all non-empty groups when collisions are
/// allowed). Any subset of these groups again keeps one item per group.
fn usable_groups(groups: &[Vec<String>], include_collisions: bool) -> Vec<usize> {
    let mut owners: HashMap<&str, usize> = HashMap::new();
    for g in groups {
        for v in g.iter().collect::<HashSet<_>>() {
            *owners.entry(v.as_str()).or_default() += 1;
        }
    }
    (0..groups.len())
        .filter(|&i| {
            groups[i]
                .iter()
                .any(|v| include_collisions || owners[v.as_str()] == 1)
        })
        .collect()
}

/// Picks between `lo` and `hi` (clamped to `avail`) distinct items, kept in
/// their original order.
fn pick_subset<R: Rng>(items: &[usize], lo: usize, hi: usize, rng: &mut R) -> Vec<usize> {
    let hi = hi.min(items.len());
    let lo = lo.min(hi);
    let size = rng.random_range(lo..=hi);
    let mut chosen: Vec<usize> = items.choose_multiple(rng, size).copied().collect();
    chosen.sort_unstable();
    chosen
}

/// All FK-linked table pairs and as many unlinked pairs (at least one),
/// the unlinked ones drawn uniformly.
fn join_pairs<R: Rng>(schema: &DatabaseSchema, rng: &mut R) -> Vec<(usize, usize)> {
    let n = schema.tables.len();
    let (mut linked, mut unlinked) = (Vec::new(), Vec::new());
    for i in 0..n {
        for j in i + 1..n {
            if schema.tables_linked(&schema.tables[i].name, &schema.tables[j].name) {
                linked.push((i, j));
            } else {
                unlinked.push((i, j));
            }
        }
    }
    let want = linked.len().max(1);
    let mut pairs = linked;
    pairs.extend(unlinked.choose_multiple(rng, want).copied());
    pairs
}

struct KindStream<'c, 'a> {
    c: &'c Candidates<'a>,
    cfg: &'c GenerationConfig,
    rng: ChaCha8Rng,
    cycler: Cycler,
    pairs: Vec<(usize, usize)>,
}

impl KindStream<'_, '_> {
    fn next(&mut self, kind: TaskKind) -> Option<TaskContext> {
        let c = self.c;
        let k = c.k;
        let cfg = self.cfg;
        let rng = &mut self.rng;
        let table = |t: usize| &k.schema.tables[t];
        match kind {
            TaskKind::ColumnFromValues => {
                let (t, col) = c.cells[self.cycler.next(rng)];
                Some(gen_col_from_values(&table(t).name, &table(t).columns[col], &k.tables[t].samples[col]))
            }
            TaskKind::ColumnTypePrediction => {
                let (t, col) = c.cells[self.cycler.next(rng)];
                Some(gen_column_type_prediction(
                    &table(t).name,
                    &table(t).columns[col],
                    &k.tables[t].samples[col],
                ))
            }
            TaskKind::ValueColumnMembership => {
                let (t, col) = c.cells[self.cycler.next(rng)];
                Some(draw_membership(k, t, col, cfg.membership_balance, rng))
            }
            TaskKind::ValueClusteringByColumn => {
                let t = c.cluster_tables[self.cycler.next(rng)];
                let cols = pick_subset(&c.cluster_columns[t], 2, cfg.max_groups, rng);
                let samples: Vec<ValueSample> = cols.iter().map(|&i| k.tables[t].samples[i].clone()).collect();
                gen_value_clustering_by_column(
                    &table(t).name,
                    &samples,
                    cfg.include_collisions,
                    cfg.max_presented_items,
                    rng,
                )
            }
            TaskKind::TableFromRow => Some(c.rows[self.cycler.next(rng)].clone()),
            TaskKind::ValueClusteringByTable => {
                let ts = pick_subset(&c.pool_tables, 2, cfg.max_groups, rng);
                let per_table: Vec<(String, Vec<String>)> =
                    ts.iter().map(|&t| (table(t).name.clone(), c.pools[t].clone())).collect();
                gen_value_clustering_by_table(&per_table, cfg.include_collisions, cfg.max_presented_items, rng)
            }
            TaskKind::TableFromColumns => {
                let t = c.column_tables[self.cycler.next(rng)];
                let all: Vec<usize> = (0..table(t).columns.len()).collect();
                let cols = pick_subset(&all, cfg.min_table_columns, cfg.max_table_columns, rng);
                let names: Vec<String> = cols.iter().map(|&i| table(t).columns[i].name.clone()).collect();
                Some(gen_table_from_columns(&names, table(t)))
            }
            TaskKind::ColumnClusteringByTable => {
                let ts = pick_subset(&c.column_tables, 2, cfg.max_groups, rng);
                let tables: Vec<_> = ts.iter().map(|&t| table(t)).collect();
                gen_column_clustering_by_table(&tables, cfg.max_presented_items, rng)
            }
            TaskKind::JoinCompatibility => {
                let (i, j) = self.pairs[self.cycler.next(rng)];
                let (a, b) = if rng.random_bool(0.5) { (i, j) } else { (j, i) };
                let fks: Vec<_> = k.schema.foreign_keys().cloned().collect();
                Some(gen_join_compatibility(table(a), table(b), &fks))
            }
        }
    }
}

/// Kind 3 draw: positive with probability `balance`, otherwise a column of
/// another name drawn uniformly from the whole database. Falls back to a
/// positive when no such column exists.
pub fn draw_membership<R: Rng>(
    k: &DatabaseKnowledge,
    t: usize,
    col: usize,
    balance: f64,
    rng: &mut R,
) -> TaskContext {
    let schema = &k.schema;
    let own = &schema.tables[t].columns[col];
    let sample = &k.tables[t].samples[col];
    let positive = rng.random_bool(balance);
    if !positive {
        let negatives: Vec<(usize, usize)> = schema
            .tables
            .iter()
            .enumerate()
            .flat_map(|(ti, tb)| (0..tb.columns.len()).map(move |ci| (ti, ci)))
            .filter(|&(ti, ci)| !ident_eq(&schema.tables[ti].columns[ci].name, &own.name))
            .collect();
        if let Some(&(ti, ci)) = negatives.choose(rng) {
            let tb = &schema.tables[ti];
            return gen_value_column_membership(&schema.tables[t].name, sample, &tb.name, &tb.columns[ci]);
        }
    }
    gen_value_column_membership(&schema.tables[t].name, sample, &schema.tables[t].name, own)
}

/// Feasible kinds of one database.
pub fn feasible_kinds(k: &DatabaseKnowledge, cfg: &GenerationConfig) -> BTreeSet<TaskKind> {
    let c = Candidates::new(k, cfg, usize::MAX);
    TaskKind::ALL.into_iter().filter(|kind| c.feasible(*kind)).collect()
}

/// Per-database instance counts. Semantic kinds get their configured quota
/// wherever feasible. Schema kinds get theirs too, unless balancing is on:
/// then the schema total is set to round(semantic / ratio) and apportioned
/// over the feasible (database, schema kind) cells in proportion to their
/// quotas by largest remainder.
pub fn plan_quotas(
    feasible: &[BTreeSet<TaskKind>],
    cfg: &GenerationConfig,
    warnings: &mut Vec<String>,
) -> Vec<BTreeMap<TaskKind, usize>> {
    let mut plan: Vec<BTreeMap<TaskKind, usize>> = feasible
        .iter()
        .map(|f| f.iter().map(|&k| (k, cfg.quota(k))).collect())
        .collect();
    if !cfg.balance_objectives {
        return plan;
    }
    let semantic: usize = plan
        .iter()
        .flat_map(|p| p.iter())
        .filter(|(k, _)| k.objective().is_semantic())
        .map(|(_, n)| n)
        .sum();
    let cells: Vec<(usize, TaskKind, usize)> = plan
        .iter()
        .enumerate()
        .flat_map(|(d, p)| {
            p.iter()
                .filter(|(k, _)| !k.objective().is_semantic())
                .map(move |(&k, &w)| (d, k, w))
        })
        .collect();
    let weight: usize = cells.iter().map(|c| c.2).sum();
    let target = (semantic as f64 / cfg.objective_ratio).round() as usize;
    if weight == 0 {
        if semantic > 0 {
            warnings.push("objective ratio unattainable: no schema task is feasible".into());
        }
        return plan;
    }
    if semantic == 0 {
        warnings.push("objective ratio unattainable: no semantic task is feasible; schema quotas kept".into());
        return plan;
    }
    let mut shares: Vec<(usize, f64)> = cells
        .iter()
        .enumerate()
        .map(|(i, c)| (i, target as f64 * c.2 as f64 / weight as f64))
        .collect();
    let mut counts: Vec<usize> = shares.iter().map(|(_, s)| s.floor() as usize).collect();
    let mut left = target - counts.iter().sum::<usize>();
    shares.sort_by(|a, b| {
        let fa = a.1 - a.1.floor();
        let fb = b.1 - b.1.floor();
        fb.partial_cmp(&fa).unwrap().then(a.0.cmp(&b.0))
    });
    for (i, _) in shares {
        if left == 0 {
            break;
        }
        if cells[i].2 > 0 {
            counts[i] += 1;
            left -= 1;
        }
    }
    for ((d, k, _), n) in cells.into_iter().zip(counts) {
        plan[d].insert(k, n);
    }
    plan
}

/// Generates the records of one database in kind order.
pub fn generate_database(
    k: &DatabaseKnowledge,
    quotas: &BTreeMap<TaskKind, usize>,
    cfg: &GenerationConfig,
    pack: &TemplatePack,
    truncate_len: usize,
    warnings: &mut Vec<String>,
) -> Result<Vec<(TaskRecord, TaskContext)>, TemplateError> {
    const ATTEMPTS: usize = 8;
    let c = Candidates::new(k, cfg, truncate_len);
    let seed = db_seed(cfg.seed, &k.schema.db_id);
    let db_id = &k.schema.db_id;
    let mut out = Vec::new();
    for kind in TaskKind::ALL {
        let quota = quotas.get(&kind).copied().unwrap_or(0);
        if quota == 0 || !c.feasible(kind) {
            continue;
        }
        let mut rng = kind_rng(seed, kind);
        let pairs = if kind == TaskKind::JoinCompatibility {
            join_pairs(&k.schema, &mut rng)
        } else {
            Vec::new()
        };
        let n = match kind {
            TaskKind::ColumnFromValues | TaskKind::ValueColumnMembership | TaskKind::ColumnTypePrediction => {
                c.cells.len()
            }
            TaskKind::ValueClusteringByColumn => c.cluster_tables.len(),
            TaskKind::TableFromRow => c.rows.len(),
            TaskKind::TableFromColumns => c.column_tables.len(),
            TaskKind::JoinCompatibility => pairs.len(),
            TaskKind::ValueClusteringByTable | TaskKind::ColumnClusteringByTable => 1,
        };
        let mut stream = KindStream {
            c: &c,
            cfg,
            rng,
            cycler: Cycler::new(n),
            pairs,
        };
        let mut made = 0;
        let mut misses = 0;
        while made < quota && misses < ATTEMPTS {
            match stream.next(kind) {
                Some(ctx) => {
                    let tpl = pack.pick(kind, made)?;
                    out.push((ctx.render(tpl, db_id)?, ctx));
                    made += 1;
                    misses = 0;
                }
                None => misses += 1,
            }
        }
        if made < quota {
            warnings.push(format!("{db_id}: {kind} produced {made} of {quota} instances"));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub records: Vec<TaskRecord>,
    /// Fill context of each record, same order.
    pub contexts: Vec<TaskContext>,
    pub stats: CorpusStats,
}

/// Generates the corpus over prepared databases. Output is ordered by
/// `db_id`, then task kind. Databases are processed in parallel on the
/// current rayon pool; each one draws from its own seeded streams, so the
/// result does not depend on the thread count.
pub fn generate_from_knowledge(
    dbs: &[DatabaseKnowledge],
    cfg: &GenerationConfig,
    pack: &TemplatePack,
    truncate_len: usize,
) -> Result<Corpus, GenerationError> {
    cfg.validate().map_err(GenerationError::Config)?;
    let mut warnings = Vec::new();
    let mut order: Vec<&DatabaseKnowledge> = Vec::new();
    let mut seen = HashSet::new();
    let mut sorted: Vec<&DatabaseKnowledge> = dbs.iter().collect();
    sorted.sort_by(|a, b| a.schema.db_id.cmp(&b.schema.db_id));
    for k in sorted {
        if k.schema.tables.is_empty() {
            warnings.push(format!("{}: database has no tables; skipped", k.schema.db_id));
        } else if !seen.insert(k.schema.db_id.clone()) {
            warnings.push(format!("{}: duplicate database id; later copy skipped", k.schema.db_id));
        } else {
            order.push(k);
        }
    }

    let feasible: Vec<BTreeSet<TaskKind>> = order.iter().map(|k| feasible_kinds(k, cfg)).collect();
    let wanted: BTreeSet<TaskKind> = feasible.iter().flatten().copied().collect();
    pack.require_kinds(wanted)?;
    let plan = plan_quotas(&feasible, cfg, &mut warnings);

    type DbOutput = (Vec<(TaskRecord, TaskContext)>, Vec<String>);
    let per_db: Vec<Result<DbOutput, TemplateError>> = order
        .par_iter()
        .zip(plan.par_iter())
        .map(|(k, quotas)| {
            let mut w = Vec::new();
            generate_database(k, quotas, cfg, pack, truncate_len, &mut w).map(|r| (r, w))
        })
        .collect();

    let mut records = Vec::new();
    let mut contexts = Vec::new();
    for r in per_db {
        let (items, w) = r?;
        warnings.extend(w);
        for (rec, ctx) in items {
            records.push(rec);
            contexts.push(ctx);
        }
    }
    let mut stats = CorpusStats::from_records(&records);
    stats.warnings = warnings;
    Ok(Corpus {
        records,
        contexts,
        stats,
    })
}

/// Prepares every schema (in parallel) and generates the corpus.
pub fn generate_corpus(
    dbs: &[DatabaseSchema],
    sampler: &SamplerConfig,
    cfg: &GenerationConfig,
    pack: &TemplatePack,
) -> Result<Corpus, GenerationError> {
    sampler.validate().map_err(GenerationError::Config)?;
    cfg.validate().map_err(GenerationError::Config)?;
    let knowledge: Vec<DatabaseKnowledge> = dbs
        .par_iter()
        .map(|s| prepare_database(s.clone(), sampler, cfg))
        .collect::<Result<_, _>>()?;
    generate_from_knowledge(&knowledge, cfg, pack, sampler.value_truncate_len)
}

/// One JSON object per line.
pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut w: W) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Parses JSONL, skipping blank lines. Errors carry the 1-based line number.
pub fn read_jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(r: R) -> Result<Vec<T>, (usize, String)> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| (i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| (i + 1, e.to_string()))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn largest_remainder_hits_target() {
        let kinds: BTreeSet<TaskKind> = TaskKind::ALL.into_iter().collect();
        let cfg = GenerationConfig {
            default_quota: 10,
            ..GenerationConfig::default()
        };
        let mut w = Vec::new();
        let plan = plan_quotas(&vec![kinds; 3], &cfg, &mut w);
        let sem: usize = plan.iter().flatten().filter(|(k, _)| k.objective().is_semantic()).map(|(_, n)| n).sum();
        let sch: usize = plan.iter().flatten().filter(|(k, _)| !k.objective().is_semantic()).map(|(_, n)| n).sum();
        assert_eq!(sem, 180);
        assert_eq!(sch, (180.0 / reference_objective_ratio()).round() as usize);
        assert!(w.is_empty());
    }

    #[test]
    fn unbalanced_plan_keeps_quotas() {
        let kinds: BTreeSet<TaskKind> = TaskKind::ALL.into_iter().collect();
        let mut w = Vec::new();
        let plan = plan_quotas(&[kinds], &GenerationConfig::uniform(0, 2), &mut w);
        assert_eq!(plan[0].values().sum::<usize>(), 18);
    }

    #[test]
    fn db_seeds_differ() {
        assert_ne!(db_seed(0, "a"), db_seed(0, "b"));
        assert_ne!(db_seed(0, "a"), db_seed(1, "a"));
        assert_eq!(db_seed(7, "pets_1"), db_seed(7, "pets_1"));
    }

    #[test]
    fn cycler_visits_everything_each_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut c = Cycler::new(5);
        for _ in 0..3 {
            let mut pass: Vec<usize> = (0..5).map(|_| c.next(&mut rng)).collect();
            pass.sort();
            assert_eq!(pass, vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn usable_groups_respect_collisions() {
        let g = vec![
            vec!["a".to_string(), "s".to_string()],
            vec!["s".to_string()],
            vec!["b".to_string()],
        ];
        assert_eq!(usable_groups(&g, false), vec![0, 2]);
        assert_eq!(usable_groups(&g, true), vec![0, 1, 2]);
    }

    #[test]
    fn config_validation() {
        assert!(GenerationConfig::default().validate().is_ok());
        let bad = GenerationConfig {
            max_table_columns: 1,
            ..GenerationConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
