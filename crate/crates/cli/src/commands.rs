use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use skf_core::eval::{evaluate as run_eval, pair_examples, read_gold, read_predictions, write_verdicts};
use skf_core::schema::{
    database_path, discover_databases, load_database_as, load_spider_tables, schema_dump,
};
use skf_core::sql::parse_sql;
use skf_core::tasks::{
    generate_corpus, prepare_database, read_jsonl, replay_corpus, write_jsonl, CorpusStats, TaskContext,
    TaskRecord, TemplatePack, REFERENCE_SCHEMA, REFERENCE_SEMANTIC, REFERENCE_TOTAL,
};
use skf_core::{Cell, DatabaseSchema};

use crate::config::PipelineConfig;
use crate::failure::{write_failed, Failure};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const CONTEXTS_FILE: &str = "contexts.jsonl";
pub const STATS_FILE: &str = "stats.json";
pub const CONFIG_FILE: &str = "config.toml";

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    match jobs {
        None => Ok(f()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|p| p.install(f))
            .map_err(|e| Failure::Internal(e.to_string())),
    }
}

/// Pretty JSON to a file, or to stdout.
fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Internal(e.to_string()))?;
    match out {
        Some(path) => fs::write(path, text + "\n").map_err(|e| write_failed(path, e)),
        None => {
            let mut stdout = io::stdout().lock();
            match writeln!(stdout, "{text}") {
                // A closed pipe (e.g. `| head`) is the reader's choice.
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Failure::Internal(e.to_string())),
                _ => Ok(()),
            }
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| write_failed(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn template_pack(cfg: &PipelineConfig) -> Result<TemplatePack, Failure> {
    match &cfg.templates_path {
        Some(p) => Ok(TemplatePack::load(p)?),
        None => Ok(TemplatePack::builtin()),
    }
}

/// Schemas of the configured databases, in db_id order. With a
/// `tables.json`, the metadata picks the databases and their ids while the
/// live files, where present, supply the schema and rows.
pub fn load_schemas(cfg: &PipelineConfig) -> Result<Vec<DatabaseSchema>, Failure> {
    if !cfg.db_root.is_dir() {
        return Err(Failure::Input(format!("database root not found: {}", cfg.db_root.display())));
    }
    let mut out = Vec::new();
    match &cfg.tables_json {
        Some(meta) => {
            for m in load_spider_tables(meta)? {
                let path = database_path(&cfg.db_root, &m.db_id);
                if path.is_file() {
                    out.push(load_database_as(&path, &m.db_id)?);
                } else {
                    log::warn!("{}: no database file at {}; schema only", m.db_id, path.display());
                    out.push(m);
                }
            }
        }
        None => {
            for (id, path) in discover_databases(&cfg.db_root)? {
                out.push(load_database_as(&path, &id)?);
            }
        }
    }
    out.sort_by(|a, b| a.db_id.cmp(&b.db_id));
    log::info!("loaded {} database schemas", out.len());
    Ok(out)
}

pub fn extract(cfg: &PipelineConfig, out: Option<&Path>) -> Result<(), Failure> {
    let schemas = load_schemas(cfg)?;
    let dump: Vec<Value> = schemas.iter().map(schema_dump).collect();
    emit(&dump, out)
}

fn cell_json(c: &Cell) -> Value {
    match c {
        Cell::Null | Cell::Blob(_) => Value::Null,
        Cell::Int(i) => json!(i),
        Cell::Real(r) => json!(r),
        Cell::Text(s) => json!(s),
    }
}

pub fn sample(cfg: &PipelineConfig, db_id: &str, table: Option<&str>, out: Option<&Path>) -> Result<(), Failure> {
    let schema = load_schemas(cfg)?
        .into_iter()
        .find(|s| s.db_id == db_id)
        .ok_or_else(|| Failure::Input(format!("unknown database `{db_id}` under {}", cfg.db_root.display())))?;
    if let Some(t) = table {
        if schema.table(t).is_none() {
            return Err(Failure::Input(format!("{db_id} has no table `{t}`")));
        }
    }
    let k = prepare_database(schema, &cfg.sampler, &cfg.generation)?;
    let tables: Vec<Value> = k
        .schema
        .tables
        .iter()
        .zip(&k.tables)
        .filter(|(t, _)| table.is_none_or(|want| t.name.eq_ignore_ascii_case(want)))
        .map(|(t, tk)| {
            let (rows, provenance) = match &tk.subtable {
                Some(s) => (
                    s.rows.iter().map(|r| r.iter().map(cell_json).collect::<Vec<_>>()).collect(),
                    s.provenance.clone(),
                ),
                None => (Vec::new(), Vec::new()),
            };
            json!({
                "table": t.name,
                "columns": t.columns.iter().map(|c| &c.name).collect::<Vec<_>>(),
                "rows": rows,
                "cluster": provenance,
                "samples": tk.samples,
            })
        })
        .collect();
    emit(&json!({ "db_id": k.schema.db_id, "tables": tables }), out)
}

pub fn generate(cfg: &PipelineConfig) -> Result<(), Failure> {
    let schemas = load_schemas(cfg)?;
    let pack = template_pack(cfg)?;
    let corpus = with_pool(cfg.jobs, || generate_corpus(&schemas, &cfg.sampler, &cfg.generation, &pack))??;
    for w in &corpus.stats.warnings {
        log::warn!("{w}");
    }

    let dir = &cfg.output_path;
    fs::create_dir_all(dir).map_err(|e| write_failed(dir, e))?;
    let corpus_path = dir.join(CORPUS_FILE);
    write_jsonl(&corpus.records, create(&corpus_path)?).map_err(|e| write_failed(&corpus_path, e))?;
    let ctx_path = dir.join(CONTEXTS_FILE);
    write_jsonl(&corpus.contexts, create(&ctx_path)?).map_err(|e| write_failed(&ctx_path, e))?;
    emit(&corpus.stats, Some(&dir.join(STATS_FILE)))?;
    let cfg_path = dir.join(CONFIG_FILE);
    match cfg.to_toml() {
        Ok(text) => fs::write(&cfg_path, text).map_err(|e| write_failed(&cfg_path, e))?,
        Err(e) => log::warn!("effective config not written: {e}"),
    }

    let s = &corpus.stats;
    println!("{} records from {} databases -> {}", s.total, s.per_db.len(), corpus_path.display());
    println!(
        "semantic {} : schema {} = {}  (target {:.4})",
        s.semantic(),
        s.schema(),
        s.objective_ratio().map_or("undefined".to_string(), |r| format!("{r:.4}")),
        cfg.generation.objective_ratio,
    );
    println!(
        "reference corpus: {REFERENCE_TOTAL} records, semantic {REFERENCE_SEMANTIC} : schema {REFERENCE_SCHEMA}"
    );
    Ok(())
}

pub fn evaluate(
    cfg: &PipelineConfig,
    gold: &Path,
    pred: &Path,
    out: Option<&Path>,
    verdicts: Option<&Path>,
) -> Result<(), Failure> {
    if !cfg.db_root.is_dir() {
        return Err(Failure::Input(format!("database root not found: {}", cfg.db_root.display())));
    }
    let gold = read_gold(gold)?;
    let preds = read_predictions(pred, gold.len())?;
    let examples = pair_examples(&gold, &preds);

    // Only the databases the gold file needs; unreadable ones are tallied
    // as missing by the evaluator.
    let ids: BTreeSet<&str> = gold.iter().map(|g| g.db_id.as_str()).collect();
    let mut schemas = Vec::new();
    for id in ids {
        let path = database_path(&cfg.db_root, id);
        match load_database_as(&path, id) {
            Ok(s) => schemas.push(s),
            Err(e) => log::warn!("{id}: {e}"),
        }
    }

    let report = run_eval(&examples, &schemas, &cfg.db_root, &cfg.eval)?;
    log::info!(
        "EM {}/{}  EX {}/{}  columns {}/{}",
        report.em_correct,
        report.n,
        report.ex_correct,
        report.ex_scored,
        report.column_accuracy.correct,
        report.column_accuracy.total
    );
    if let Some(path) = verdicts {
        write_verdicts(create(path)?, &report.verdicts).map_err(|e| write_failed(path, e))?;
    }
    emit(&report, out)
}

pub fn dump_ast(sql: &str, out: Option<&Path>) -> Result<(), Failure> {
    let q = parse_sql(sql).map_err(|e| Failure::Format(e.to_string()))?;
    emit(&q, out)
}

pub fn dump_schema(cfg: &PipelineConfig, db_id: &str, out: Option<&Path>) -> Result<(), Failure> {
    let schema = load_schemas(cfg)?
        .into_iter()
        .find(|s| s.db_id == db_id)
        .ok_or_else(|| Failure::Input(format!("unknown database `{db_id}`")))?;
    emit(&schema_dump(&schema), out)
}

fn read_lines<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<Vec<T>, Failure> {
    read_jsonl(open(path)?).map_err(|(line, msg)| Failure::Format(format!("{}:{line}: {msg}", path.display())))
}

pub fn stats(
    cfg: &PipelineConfig,
    corpus: &Path,
    stats: Option<&Path>,
    contexts: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let records: Vec<TaskRecord> = read_lines(corpus)?;
    let counted = CorpusStats::from_records(&records);
    let mut problems = Vec::new();
    let mut report = json!({
        "total": counted.total,
        "per_objective": counted.per_objective,
        "per_task_kind": counted.per_task_kind,
        "per_db": counted.per_db,
        "objective_ratio": counted.objective_ratio(),
    });

    if let Some(path) = stats {
        let embedded: CorpusStats = serde_json::from_reader(open(path)?)
            .map_err(|e| Failure::Format(format!("{}: {e}", path.display())))?;
        let same = counted.same_counts(&embedded);
        if !same {
            problems.push(format!("counts differ from {}", path.display()));
        }
        report["stats_match"] = json!(same);
    }

    if let Some(path) = contexts {
        let ctx: Vec<TaskContext> = read_lines(path)?;
        let schemas = load_schemas(cfg)?;
        let pack = template_pack(cfg)?;
        let r = replay_corpus(&records, &ctx, &pack, &schemas);
        if !r.is_clean() {
            problems.push(format!("{} of {} records fail re-derivation", r.failures.len(), r.checked));
        }
        report["replay"] = json!({
            "checked": r.checked,
            "rederived": r.rederived,
            "clean": r.is_clean(),
            "failures": r.failures.iter().take(20).collect::<Vec<_>>(),
        });
    }

    emit(&report, out)?;
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Failure::Format(problems.join("; ")))
    }
}
