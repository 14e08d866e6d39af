//! Execution match: both queries run against a read-only handle and their
//! results are compared as multisets of rows.

use std::cmp::Ordering;
use std::path::Path;
use std::time::{Duration, Instant};

use rusqlite::{Connection, ErrorCode};

use super::EvalError;
use crate::schema::{open_database, Cell};
use crate::sql::parse_sql;

/// Relative tolerance for comparing floating-point cells.
pub const FLOAT_TOLERANCE: f64 = 1e-6;

/// Rows above which the quadratic matching fallback is skipped.
const GREEDY_LIMIT: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub columns: usize,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecFailure {
    Timeout,
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecOutcome {
    Match,
    Mismatch,
    PredFailed(ExecFailure),
    GoldFailed(ExecFailure),
}

impl ExecOutcome {
    pub fn is_match(&self) -> bool {
        matches!(self, ExecOutcome::Match)
    }
}

/// Opens a database for scoring. The handle refuses writes twice over: the
/// file is opened read-only and the connection is put in query-only mode.
pub fn open_for_eval(path: &Path) -> Result<Connection, EvalError> {
    let unavailable = |reason: String| EvalError::DatabaseUnavailable {
        path: path.to_path_buf(),
        reason,
    };
    let conn = open_database(path).map_err(|e| unavailable(e.to_string()))?;
    conn.pragma_update(None, "query_only", true)
        .map_err(|e| unavailable(e.to_string()))?;
    Ok(conn)
}

/// Runs one statement, interrupting it once `timeout` has elapsed.
pub fn run_query(conn: &Connection, sql: &str, timeout: Duration) -> Result<ResultSet, ExecFailure> {
    let deadline = Instant::now() + timeout;
    conn.progress_handler(1000, Some(move || Instant::now() >= deadline));
    let result = collect(conn, sql);
    conn.progress_handler(0, None::<fn() -> bool>);
    result.map_err(|e| match e.sqlite_error_code() {
        Some(ErrorCode::OperationInterrupted) => ExecFailure::Timeout,
        _ => ExecFailure::Error(e.to_string()),
    })
}

fn collect(conn: &Connection, sql: &str) -> rusqlite::Result<ResultSet> {
    let mut stmt = conn.prepare(sql)?;
    if !stmt.readonly() {
        return Err(rusqlite::Error::InvalidQuery);
    }
    let columns = stmt.column_count();
    let mut rows = Vec::new();
    let mut q = stmt.query([])?;
    while let Some(r) = q.next()? {
        let mut row = Vec::with_capacity(columns);
        for i in 0..columns {
            row.push(Cell::from_value_ref(r.get_ref(i)?));
        }
        rows.push(row);
    }
    Ok(ResultSet { columns, rows })
}

/// Cell equality used by execution match: NULL equals NULL, numbers compare
/// with a relative tolerance regardless of integer/real storage, everything
/// else must be identical.
pub fn cells_equal(a: &Cell, b: &Cell) -> bool {
    match (a, b) {
        (Cell::Int(x), Cell::Int(y)) => x == y,
        (Cell::Int(_) | Cell::Real(_), Cell::Int(_) | Cell::Real(_)) => {
            let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            x == y || (x - y).abs() <= FLOAT_TOLERANCE * 1f64.max(x.abs()).max(y.abs())
        }
        _ => a == b,
    }
}

fn rows_equal(a: &[Cell], b: &[Cell]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| cells_equal(x, y))
}

fn rank(c: &Cell) -> u8 {
    match c {
        Cell::Null => 0,
        Cell::Int(_) | Cell::Real(_) => 1,
        Cell::Text(_) => 2,
        Cell::Blob(_) => 3,
    }
}

fn cmp_cells(a: &Cell, b: &Cell) -> Ordering {
    rank(a).cmp(&rank(b)).then_with(|| match (a, b) {
        (Cell::Int(x), Cell::Int(y)) => x.cmp(y),
        (Cell::Int(_) | Cell::Real(_), _) => a.as_f64().unwrap().total_cmp(&b.as_f64().unwrap()),
        (Cell::Text(x), Cell::Text(y)) => x.cmp(y),
        (Cell::Blob(x), Cell::Blob(y)) => x.cmp(y),
        _ => Ordering::Equal,
    })
}

fn cmp_rows(a: &[Cell], b: &[Cell]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| cmp_cells(x, y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

/// Compares two results. Two empty results match whatever their width.
pub fn results_match(pred: &ResultSet, gold: &ResultSet, ordered: bool) -> bool {
    if pred.rows.is_empty() && gold.rows.is_empty() {
        return true;
    }
    if pred.columns != gold.columns || pred.rows.len() != gold.rows.len() {
        return false;
    }
    if ordered {
        return pred.rows.iter().zip(&gold.rows).all(|(a, b)| rows_equal(a, b));
    }
    let mut p: Vec<&Vec<Cell>> = pred.rows.iter().collect();
    let mut g: Vec<&Vec<Cell>> = gold.rows.iter().collect();
    p.sort_by(|a, b| cmp_rows(a, b));
    g.sort_by(|a, b| cmp_rows(a, b));
    if p.iter().zip(&g).all(|(a, b)| rows_equal(a, b)) {
        return true;
    }
    // Values within tolerance of each other can sort differently on the two
    // sides; pair rows up explicitly when that could be the cause.
    p.len() <= GREEDY_LIMIT && greedy_match(&p, &g)
}

fn greedy_match(pred: &[&Vec<Cell>], gold: &[&Vec<Cell>]) -> bool {
    let mut used = vec![false; gold.len()];
    pred.iter().all(|row| {
        let hit = gold
            .iter()
            .enumerate()
            .find(|(i, g)| !used[*i] && rows_equal(row, g));
        match hit {
            Some((i, _)) => {
                used[i] = true;
                true
            }
            None => false,
        }
    })
}

/// True when the gold query fixes the order of its result.
pub fn gold_is_ordered(gold: &str) -> bool {
    parse_sql(gold).is_ok_and(|q| !q.top_level_order_by().is_empty())
}

/// Executes gold then prediction on an open handle and compares them.
pub fn execute_pair(conn: &Connection, pred: &str, gold: &str, timeout: Duration) -> ExecOutcome {
    let gold_rows = match run_query(conn, gold, timeout) {
        Ok(r) => r,
        Err(e) => return ExecOutcome::GoldFailed(e),
    };
    let pred_rows = match run_query(conn, pred, timeout) {
        Ok(r) => r,
        Err(e) => return ExecOutcome::PredFailed(e),
    };
    if results_match(&pred_rows, &gold_rows, gold_is_ordered(gold)) {
        ExecOutcome::Match
    } else {
        ExecOutcome::Mismatch
    }
}

/// Execution match against the database file at `db`. A failing or timed-out
/// prediction is a mismatch; a failing gold query is an error.
pub fn execution_match(pred: &str, gold: &str, db: &Path, timeout: Duration) -> Result<bool, EvalError> {
    let conn = open_for_eval(db)?;
    match execute_pair(&conn, pred, gold, timeout) {
        ExecOutcome::GoldFailed(f) => Err(EvalError::GoldFailed(match f {
            ExecFailure::Timeout => "timed out".into(),
            ExecFailure::Error(e) => e,
        })),
        outcome => Ok(outcome.is_match()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rs(rows: Vec<Vec<Cell>>) -> ResultSet {
        ResultSet {
            columns: rows.first().map_or(1, Vec::len),
            rows,
        }
    }

    #[test]
    fn float_tolerance() {
        assert!(cells_equal(&Cell::Real(0.1 + 0.2), &Cell::Real(0.3)));
        assert!(cells_equal(&Cell::Int(3), &Cell::Real(3.0)));
        assert!(cells_equal(&Cell::Real(1e9), &Cell::Real(1e9 + 100.0)));
        assert!(!cells_equal(&Cell::Real(1.0), &Cell::Real(1.00001)));
        assert!(!cells_equal(&Cell::Int(1), &Cell::Text("1".into())));
        assert!(cells_equal(&Cell::Null, &Cell::Null));
    }

    #[test]
    fn multiset_semantics() {
        let a = rs(vec![vec![Cell::Int(1)], vec![Cell::Int(2)], vec![Cell::Int(2)]]);
        let b = rs(vec![vec![Cell::Int(2)], vec![Cell::Int(1)], vec![Cell::Int(2)]]);
        let c = rs(vec![vec![Cell::Int(1)], vec![Cell::Int(1)], vec![Cell::Int(2)]]);
        assert!(results_match(&a, &b, false));
        assert!(!results_match(&a, &b, true));
        assert!(!results_match(&a, &c, false));
    }

    #[test]
    fn near_equal_floats_that_sort_apart() {
        let a = rs(vec![vec![Cell::Real(1.0), Cell::Int(2)], vec![Cell::Real(1.0000000001), Cell::Int(1)]]);
        let b = rs(vec![vec![Cell::Real(1.0000000001), Cell::Int(2)], vec![Cell::Real(1.0), Cell::Int(1)]]);
        assert!(results_match(&a, &b, false));
    }

    #[test]
    fn width_matters_unless_empty() {
        let one = rs(vec![vec![Cell::Int(1)]]);
        let two = rs(vec![vec![Cell::Int(1), Cell::Int(1)]]);
        assert!(!results_match(&one, &two, false));
        let e1 = ResultSet { columns: 1, rows: vec![] };
        let e2 = ResultSet { columns: 2, rows: vec![] };
        assert!(results_match(&e1, &e2, false));
    }

    #[test]
    fn timeout_and_write_refusal() {
        let conn = Connection::open_in_memory().unwrap();
        conn.execute_batch("CREATE TABLE t(x); INSERT INTO t VALUES (1),(2),(3);").unwrap();
        let slow = "WITH RECURSIVE c(i) AS (SELECT 1 UNION ALL SELECT i + 1 FROM c) SELECT count(*) FROM c";
        assert_eq!(run_query(&conn, slow, Duration::from_millis(50)), Err(ExecFailure::Timeout));
        assert!(matches!(run_query(&conn, "DELETE FROM t", Duration::from_secs(1)), Err(ExecFailure::Error(_))));
        assert_eq!(run_query(&conn, "SELECT count(*) FROM t", Duration::from_secs(1)).unwrap().rows, vec![vec![Cell::Int(3)]]);
    }

    #[test]
    fn ordered_only_with_top_level_order_by() {
        assert!(gold_is_ordered("SELECT a FROM t ORDER BY a"));
        assert!(!gold_is_ordered("SELECT a FROM t WHERE a IN (SELECT b FROM u ORDER BY b LIMIT 1)"));
        assert!(!gold_is_ordered("not sql"));
    }
}
