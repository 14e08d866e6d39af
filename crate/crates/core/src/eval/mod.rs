//! Scoring of predicted SQL against gold SQL: exact match over canonical
//! forms, execution match over query results, and the share of generated
//! column names that exist in the schema.

mod columns;
mod exact;
mod execution;
mod io;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use rusqlite::Connection;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use columns::{column_accuracy, count_column_refs, ColumnCounts};
pub use exact::{compare_exact, exact_match, EmOutcome};
pub use execution::{
    cells_equal, execute_pair, execution_match, gold_is_ordered, open_for_eval, results_match, run_query,
    ExecFailure, ExecOutcome, ResultSet, FLOAT_TOLERANCE,
};
pub use io::{parse_gold, parse_predictions, pair_examples, read_gold, read_predictions, write_verdicts, GoldEntry};

use crate::schema::{database_path, DatabaseSchema};
use crate::sql::{canonicalize_with, parse_sql, CanonMode, SqlError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("database unavailable: {path}: {reason}")]
    DatabaseUnavailable { path: PathBuf, reason: String },
    #[error("gold query failed: {0}")]
    GoldFailed(String),
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("{}{}: {reason}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Format {
        path: PathBuf,
        line: Option<usize>,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalExample {
    pub db_id: String,
    pub question: String,
    pub gold_sql: String,
    pub predicted_sql: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmMode {
    #[default]
    Component,
    Strict,
}

impl EmMode {
    pub fn canon_mode(self) -> CanonMode {
        match self {
            EmMode::Component => CanonMode::Component,
            EmMode::Strict => CanonMode::Strict,
        }
    }
}

impl std::str::FromStr for EmMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "component" => Ok(EmMode::Component),
            "strict" => Ok(EmMode::Strict),
            _ => Err(format!("unknown EM mode `{s}` (expected component or strict)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub em_mode: EmMode,
    pub timeout_secs: f64,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            em_mode: EmMode::Component,
            timeout_secs: 30.0,
            jobs: None,
        }
    }
}

impl EvalConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(EvalError::Config(format!("timeout must be positive, got {}", self.timeout_secs)));
        }
        if self.jobs == Some(0) {
            return Err(EvalError::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Why an example did not score fully. At most one per example, in order of
/// precedence: database problems, gold problems, then prediction problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    MissingDatabase,
    ExecErrorGold,
    ParseError,
    Unsupported,
    Timeout,
    ExecErrorPred,
    Mismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub index: usize,
    pub em: bool,
    /// `None` when the example is excluded from execution scoring.
    pub ex: Option<bool>,
    pub col_refs_total: usize,
    pub col_refs_valid: usize,
    pub failure_kind: Option<FailureKind>,
}

/// Independent counters; one example may increment several.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorTally {
    /// Predictions that fail to parse.
    pub parse_error: usize,
    /// Predictions outside the supported dialect.
    pub unsupported: usize,
    pub exec_error_pred: usize,
    pub exec_error_gold: usize,
    /// Predictions interrupted by the timeout.
    pub timeout: usize,
    pub missing_database: usize,
    /// Gold queries that fail to parse; their examples cannot match exactly.
    pub gold_unparseable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub n: usize,
    pub em_mode: EmMode,
    pub em_correct: usize,
    pub em_rate: Option<f64>,
    /// Examples counted in the execution-match denominator.
    pub ex_scored: usize,
    pub ex_correct: usize,
    pub ex_rate: Option<f64>,
    #[serde(serialize_with = "columns::serialize_counts")]
    pub column_accuracy: ColumnCounts,
    pub error_tally: ErrorTally,
    #[serde(skip)]
    pub verdicts: Vec<Verdict>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl EvalReport {
    /// Aggregates verdicts (in any order) into a report.
    pub fn from_verdicts(mut verdicts: Vec<Verdict>, em_mode: EmMode, error_tally: ErrorTally) -> Self {
        verdicts.sort_by_key(|v| v.index);
        let n = verdicts.len();
        let em_correct = verdicts.iter().filter(|v| v.em).count();
        let ex_scored = verdicts.iter().filter(|v| v.ex.is_some()).count();
        let ex_correct = verdicts.iter().filter(|v| v.ex == Some(true)).count();
        let column_accuracy = verdicts.iter().fold(ColumnCounts::default(), |mut acc, v| {
            acc.add(ColumnCounts {
                correct: v.col_refs_valid,
                total: v.col_refs_total,
            });
            acc
        });
        EvalReport {
            n,
            em_mode,
            em_correct,
            em_rate: ratio(em_correct, n),
            ex_scored,
            ex_correct,
            ex_rate: ratio(ex_correct, ex_scored),
            column_accuracy,
            error_tally,
            verdicts,
        }
    }
}

struct Scored {
    verdict: Verdict,
    tally: ErrorTally,
}

type ConnCache = HashMap<String, Option<Connection>>;

fn score_one(
    index: usize,
    ex: &EvalExample,
    schemas: &HashMap<&str, &DatabaseSchema>,
    db_root: &Path,
    cfg: &EvalConfig,
    conns: &mut ConnCache,
) -> Scored {
    let mut tally = ErrorTally::default();
    let pred_parse_failure = |e: &SqlError, tally: &mut ErrorTally| match e {
        SqlError::Parse(_) => {
            tally.parse_error += 1;
            FailureKind::ParseError
        }
        SqlError::Unsupported { .. } => {
            tally.unsupported += 1;
            FailureKind::Unsupported
        }
    };

    let pred_ast = parse_sql(&ex.predicted_sql);
    let mut pred_problem = pred_ast.as_ref().err().map(|e| pred_parse_failure(e, &mut tally));

    let em = match (&pred_ast, parse_sql(&ex.gold_sql)) {
        (Ok(p), Ok(g)) => {
            let mode = cfg.em_mode.canon_mode();
            canonicalize_with(p, mode) == canonicalize_with(&g, mode)
        }
        (_, Err(_)) => {
            tally.gold_unparseable += 1;
            false
        }
        _ => false,
    };

    let schema = schemas.get(ex.db_id.as_str());
    let cols = match (&pred_ast, schema) {
        (Ok(q), Some(s)) => count_column_refs(q, s),
        _ => ColumnCounts::default(),
    };

    let conn = conns.entry(ex.db_id.clone()).or_insert_with(|| {
        let path = database_path(db_root, &ex.db_id);
        open_for_eval(&path).ok()
    });
    let mut db_problem = None;
    let ex_verdict = match conn {
        None => {
            tally.missing_database += 1;
            db_problem = Some(FailureKind::MissingDatabase);
            None
        }
        Some(conn) => match execute_pair(conn, &ex.predicted_sql, &ex.gold_sql, cfg.timeout()) {
            ExecOutcome::Match => Some(true),
            ExecOutcome::Mismatch => {
                pred_problem.get_or_insert(FailureKind::Mismatch);
                Some(false)
            }
            ExecOutcome::PredFailed(f) => {
                let kind = match f {
                    ExecFailure::Timeout => {
                        tally.timeout += 1;
                        FailureKind::Timeout
                    }
                    ExecFailure::Error(_) => {
                        tally.exec_error_pred += 1;
                        FailureKind::ExecErrorPred
                    }
                };
                pred_problem.get_or_insert(kind);
                Some(false)
            }
            ExecOutcome::GoldFailed(_) => {
                tally.exec_error_gold += 1;
                db_problem = Some(FailureKind::ExecErrorGold);
                None
            }
        },
    };

    Scored {
        verdict: Verdict {
            index,
            em,
            ex: ex_verdict,
            col_refs_total: cols.total,
            col_refs_valid: cols.correct,
            failure_kind: db_problem.or(pred_problem),
        },
        tally,
    }
}

fn merge(mut a: ErrorTally, b: ErrorTally) -> ErrorTally {
    a.parse_error += b.parse_error;
    a.unsupported += b.unsupported;
    a.exec_error_pred += b.exec_error_pred;
    a.exec_error_gold += b.exec_error_gold;
    a.timeout += b.timeout;
    a.missing_database += b.missing_database;
    a.gold_unparseable += b.gold_unparseable;
    a
}

/// Scores every example. Databases are looked up as
/// `<db_root>/<db_id>/<db_id>.sqlite`; `schemas` supplies the schemas used for
/// column accuracy. Examples are scored in parallel, each worker with its own
/// read-only handles, and the report is assembled in example order.
pub fn evaluate(
    examples: &[EvalExample],
    schemas: &[DatabaseSchema],
    db_root: &Path,
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    cfg.validate()?;
    let by_id: HashMap<&str, &DatabaseSchema> = schemas.iter().map(|s| (s.db_id.as_str(), s)).collect();
    let run = || {
        examples
            .par_iter()
            .enumerate()
            .map_init(ConnCache::new, |conns, (i, ex)| score_one(i, ex, &by_id, db_root, cfg, conns))
            .collect::<Vec<Scored>>()
    };
    let scored = match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| EvalError::Config(e.to_string()))?
            .install(run),
        None => run(),
    };
    let tally = scored.iter().fold(ErrorTally::default(), |acc, s| merge(acc, s.tally));
    let verdicts = scored.into_iter().map(|s| s.verdict).collect();
    Ok(EvalReport::from_verdicts(verdicts, cfg.em_mode, tally))
}
