use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::time::Duration;

use rusqlite::Connection;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use skf_core::eval::{
    column_accuracy, evaluate, exact_match, execution_match, read_gold, EvalConfig, EvalExample, EmMode,
    FailureKind,
};
use skf_core::sql::{extract_column_refs, parse_sql, CanonMode};
use skf_core::testkit::{build_fixtures, build_spider_mini, cases_dir, dev_json_path, FixtureRoot};
use skf_core::DatabaseSchema;

#[derive(Deserialize)]
struct TableCase {
    name: String,
    db_id: String,
    question: String,
    gold: String,
    predict: String,
    predict_star: String,
    predict_failure: String,
    predict_refs: [usize; 2],
}

fn table_cases() -> Vec<TableCase> {
    serde_json::from_str(&fs::read_to_string(cases_dir().join("table_cases.json")).unwrap()).unwrap()
}

#[derive(Deserialize)]
struct ColumnCase {
    db_id: String,
    predicted: String,
    refs: Vec<String>,
}

fn column_cases() -> Vec<ColumnCase> {
    serde_json::from_str(&fs::read_to_string(cases_dir().join("column_accuracy.json")).unwrap()).unwrap()
}

fn example(db_id: &str, gold: &str, pred: &str) -> EvalExample {
    EvalExample {
        db_id: db_id.into(),
        question: String::new(),
        gold_sql: gold.into(),
        predicted_sql: pred.into(),
    }
}

fn case_root() -> FixtureRoot {
    build_fixtures(&["dog_kennels", "flight_2", "pets_1"])
}

const SECS: Duration = Duration::from_secs(30);

#[test]
fn bad_cases_fail_both_metrics_and_corrected_cases_pass() {
    let root = case_root();
    for c in table_cases() {
        let db = root.path_of(&c.db_id);
        assert!(!exact_match(&c.predict, &c.gold, CanonMode::Component), "{}", c.name);
        assert!(!execution_match(&c.predict, &c.gold, &db, SECS).unwrap(), "{}", c.name);
        assert!(exact_match(&c.predict_star, &c.gold, CanonMode::Component), "{}", c.name);
        assert!(execution_match(&c.predict_star, &c.gold, &db, SECS).unwrap(), "{}", c.name);
    }
}

#[test]
fn four_case_report_matches_hand_verdicts() {
    let root = case_root();
    let cases = table_cases();
    let examples: Vec<EvalExample> = cases
        .iter()
        .map(|c| EvalExample {
            question: c.question.clone(),
            ..example(&c.db_id, &c.gold, &c.predict)
        })
        .collect();
    let report = evaluate(&examples, &root.schemas(), root.root(), &EvalConfig::default()).unwrap();
    assert_eq!((report.em_correct, report.ex_correct, report.ex_scored), (0, 0, 4));
    assert_eq!(report.em_rate, Some(0.0));
    assert_eq!(report.ex_rate, Some(0.0));
    for (c, v) in cases.iter().zip(&report.verdicts) {
        let want = match c.predict_failure.as_str() {
            "exec_error_pred" => FailureKind::ExecErrorPred,
            "mismatch" => FailureKind::Mismatch,
            other => panic!("unexpected {other}"),
        };
        assert_eq!(v.failure_kind, Some(want), "{}", c.name);
        assert_eq!([v.col_refs_total, v.col_refs_valid], c.predict_refs, "{}", c.name);
    }
    // pets and dogs predictions reference missing columns.
    assert_eq!(report.error_tally.exec_error_pred, 2);
    assert_eq!(report.column_accuracy.correct, 5);
    assert_eq!(report.column_accuracy.total, 8);
}

#[test]
fn case_two_prediction_returns_nothing_while_gold_returns_a_country() {
    let root = case_root();
    let conn = Connection::open(root.path_of("flight_2")).unwrap();
    let rows = |sql: &str| -> Vec<String> {
        let mut st = conn.prepare(sql).unwrap();
        st.query_map([], |r| r.get::<_, String>(0)).unwrap().map(Result::unwrap).collect()
    };
    let c = &table_cases()[3];
    assert!(rows(&c.predict).is_empty());
    assert_eq!(rows(&c.gold), vec!["USA".to_string()]);
}

#[test]
fn equivalent_join_order_matches_on_execution() {
    let root = case_root();
    let db = root.path_of("flight_2");
    let gold = "SELECT count(*) FROM FLIGHTS AS T1 JOIN AIRPORTS AS T2 ON T1.DestAirport = T2.AirportCode WHERE T2.City = \"Aberdeen\"";
    let pred = "SELECT count(*) FROM airports AS a JOIN flights AS f ON f.DestAirport = a.AirportCode WHERE a.City = 'Aberdeen'";
    assert!(execution_match(pred, gold, &db, SECS).unwrap());
    let other = "SELECT count(*) FROM flights WHERE DestAirport IN (SELECT AirportCode FROM airports WHERE City = 'Aberdeen')";
    assert!(execution_match(other, gold, &db, SECS).unwrap());
    assert!(!exact_match(other, gold, CanonMode::Component));
}

#[test]
fn nonexistent_column_is_an_execution_failure() {
    let root = case_root();
    let gold = "SELECT pettype, weight FROM pets ORDER BY pet_age LIMIT 1";
    let pred = "SELECT pet_type, weight FROM pets ORDER BY pet_age LIMIT 1";
    assert!(!execution_match(pred, gold, &root.path_of("pets_1"), SECS).unwrap());
}

#[test]
fn strict_mode_flag_changes_reordered_select_verdict() {
    let root = case_root();
    let gold = "SELECT pettype, weight FROM pets ORDER BY pet_age LIMIT 1";
    let pred = "SELECT weight, pettype FROM pets ORDER BY pet_age LIMIT 1";
    let ex = [example("pets_1", gold, pred)];
    let mut cfg = EvalConfig::default();
    let component = evaluate(&ex, &root.schemas(), root.root(), &cfg).unwrap();
    cfg.em_mode = EmMode::Strict;
    let strict = evaluate(&ex, &root.schemas(), root.root(), &cfg).unwrap();
    assert!(component.verdicts[0].em);
    assert!(!strict.verdicts[0].em);
}

/// Oracle: the hand-enumerated reference names checked against the column
/// lists SQLite reports, without going through the crate's schema types.
fn scripted_membership(root: &FixtureRoot, cases: &[ColumnCase]) -> (usize, usize) {
    let mut columns: HashMap<String, HashSet<String>> = HashMap::new();
    let (mut correct, mut total) = (0, 0);
    for c in cases {
        let cols = columns.entry(c.db_id.clone()).or_insert_with(|| {
            let conn = Connection::open(root.path_of(&c.db_id)).unwrap();
            let tables: Vec<String> = conn
                .prepare("SELECT name FROM sqlite_master WHERE type = 'table'")
                .unwrap()
                .query_map([], |r| r.get(0))
                .unwrap()
                .map(Result::unwrap)
                .collect();
            let mut set = HashSet::new();
            for t in tables {
                let mut st = conn.prepare(&format!("PRAGMA table_info(\"{t}\")")).unwrap();
                for name in st.query_map([], |r| r.get::<_, String>(1)).unwrap() {
                    set.insert(name.unwrap().to_lowercase());
                }
            }
            set
        });
        total += c.refs.len();
        correct += c.refs.iter().filter(|r| cols.contains(&r.to_lowercase())).count();
    }
    (correct, total)
}

#[test]
fn extracted_refs_equal_hand_enumeration() {
    let root = build_spider_mini();
    let schemas: HashMap<String, DatabaseSchema> = root.schemas().into_iter().map(|s| (s.db_id.clone(), s)).collect();
    for c in column_cases() {
        let q = parse_sql(&c.predicted).unwrap();
        let got: Vec<String> = extract_column_refs(&q, schemas.get(&c.db_id))
            .into_iter()
            .map(|r| r.column)
            .collect();
        assert_eq!(got, c.refs, "{}", c.predicted);
    }
}

#[test]
fn column_accuracy_matches_scripted_count() {
    let root = build_spider_mini();
    let cases = column_cases();
    assert_eq!(cases.len(), 50);
    let schemas: HashMap<String, DatabaseSchema> = root.schemas().into_iter().map(|s| (s.db_id.clone(), s)).collect();
    let examples: Vec<EvalExample> = cases.iter().map(|c| example(&c.db_id, "SELECT 1", &c.predicted)).collect();
    let counts = column_accuracy(&examples, &schemas);
    let (correct, total) = scripted_membership(&root, &cases);
    assert_eq!((counts.correct, counts.total), (correct, total));

    // The first case is the dogs prediction with two invented names.
    let first = column_accuracy(&examples[..1], &schemas);
    assert_eq!((first.correct, first.total), (0, 2));
    assert_eq!(first.rate(), Some(0.0));
}

#[test]
fn column_accuracy_small_mixed_set() {
    let root = build_fixtures(&["concert_singer"]);
    let schemas: HashMap<String, DatabaseSchema> = root.schemas().into_iter().map(|s| (s.db_id.clone(), s)).collect();
    let preds = [
        "SELECT name, country FROM singer",                            // 2 valid
        "SELECT singer_name FROM singer WHERE age > 30",               // 1 of 2
        "SELECT stadium_name, capacity FROM stadium ORDER BY highest", // 2 of 3
        "SELECT theme, year, venue FROM concert",                      // 2 of 3
    ];
    let ex: Vec<EvalExample> = preds.iter().map(|p| example("concert_singer", "SELECT 1", p)).collect();
    let c = column_accuracy(&ex, &schemas);
    assert_eq!((c.correct, c.total), (7, 10));
    assert_eq!(c.rate(), Some(0.7));
    let both_valid = column_accuracy(&ex[..1], &schemas);
    assert_eq!(both_valid.rate(), Some(1.0));
}

fn gold_examples() -> Vec<EvalExample> {
    read_gold(&dev_json_path())
        .unwrap()
        .into_iter()
        .map(|g| example(&g.db_id, &g.query, &g.query))
        .collect()
}

#[test]
fn gold_against_itself_scores_perfectly() {
    let root = build_spider_mini();
    let examples = gold_examples();
    assert!(examples.len() >= 100);
    let report = evaluate(&examples, &root.schemas(), root.root(), &EvalConfig::default()).unwrap();
    assert_eq!(report.em_rate, Some(1.0));
    assert_eq!(report.ex_rate, Some(1.0));
    assert_eq!(report.column_accuracy.rate(), Some(1.0));
    assert_eq!(report.error_tally, Default::default());
}

fn file_digest(path: &Path) -> Vec<u8> {
    Sha256::digest(fs::read(path).unwrap()).to_vec()
}

#[test]
fn evaluation_never_mutates_databases() {
    let root = build_spider_mini();
    let schemas = root.schemas();
    let before: Vec<Vec<u8>> = schemas.iter().map(|s| file_digest(s.db_path().unwrap())).collect();
    let mut examples = gold_examples();
    let hostile = [
        ("dog_kennels", "DELETE FROM Dogs"),
        ("pets_1", "DROP TABLE Pets"),
        ("singer", "INSERT INTO singer VALUES (99, 'x', 1, 1, 'y')"),
        ("flight_2", "UPDATE airlines SET Country = 'X'"),
        ("orchestra", "SELECT 1; DELETE FROM conductor"),
        ("poker_player", "PRAGMA query_only = 0"),
    ];
    for (db, sql) in hostile {
        examples.push(example(db, "SELECT 1", sql));
    }
    let report = evaluate(&examples, &schemas, root.root(), &EvalConfig::default()).unwrap();
    assert!(report.verdicts[report.n - hostile.len()..].iter().all(|v| v.ex == Some(false)));
    let after: Vec<Vec<u8>> = schemas.iter().map(|s| file_digest(s.db_path().unwrap())).collect();
    assert_eq!(before, after);
}

#[test]
fn reports_are_deterministic_across_runs_and_job_counts() {
    let root = build_spider_mini();
    let schemas = root.schemas();
    let mut examples = gold_examples();
    // Pair each gold with the next query of the same database for variety.
    let n = examples.len();
    for i in 0..n {
        let j = (i + 1) % n;
        if examples[j].db_id == examples[i].db_id {
            examples[i].predicted_sql = examples[j].gold_sql.clone();
        }
    }
    let run = |jobs| {
        let cfg = EvalConfig {
            jobs: Some(jobs),
            ..EvalConfig::default()
        };
        evaluate(&examples, &schemas, root.root(), &cfg).unwrap()
    };
    let a = run(1);
    assert_eq!(a, run(1));
    assert_eq!(a, run(6));
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&run(3)).unwrap());
}

#[test]
fn strict_em_implies_ex_over_fixture_pairs() {
    let root = build_spider_mini();
    let golds = gold_examples();
    let mut checked = 0;
    for a in &golds {
        // Re-printed forms and same-database gold pairs.
        let reprinted = parse_sql(&a.gold_sql).unwrap().to_string();
        let mut candidates = vec![reprinted, a.gold_sql.to_lowercase()];
        candidates.extend(golds.iter().filter(|b| b.db_id == a.db_id).map(|b| b.gold_sql.clone()));
        for pred in candidates {
            if exact_match(&pred, &a.gold_sql, CanonMode::Strict) {
                checked += 1;
                let db = root.path_of(&a.db_id);
                assert!(
                    execution_match(&pred, &a.gold_sql, &db, SECS).unwrap_or(false),
                    "{pred} vs {}",
                    a.gold_sql
                );
            }
        }
    }
    assert!(checked >= 2 * golds.len());
}
