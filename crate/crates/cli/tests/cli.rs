use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use skf_core::tasks::{CorpusStats, TaskKind, TaskRecord};
use skf_core::testkit::{build_fixtures, build_spider_mini, dev_json_path, spider_mini_dir};

fn skf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skf"))
        .args(args)
        .env_remove("SKF_LOG")
        .output()
        .expect("run skf")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn records(path: &Path) -> Vec<TaskRecord> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn extract_dumps_every_database() {
    let root = build_spider_mini();
    let o = skf(&["extract", "--db-root", s(root.root())]);
    assert!(o.status.success());
    let dump = stdout_json(&o);
    let dbs = dump.as_array().unwrap();
    assert_eq!(dbs.len(), 12);
    let kennels = dbs.iter().find(|d| d["db_id"] == "dog_kennels").unwrap();
    let dogs = kennels["tables"].as_array().unwrap().iter().find(|t| t["name"] == "Dogs").unwrap();
    let cols: Vec<&str> = dogs["columns"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(cols.contains(&"date_arrived"));
    for key in ["name", "columns", "primary_key", "foreign_keys"] {
        assert!(dogs.get(key).is_some());
    }
}

#[test]
fn extract_with_tables_json() {
    let root = build_fixtures(&["pets_1"]);
    let meta = spider_mini_dir().join("tables.json");
    let o = skf(&["extract", "--db-root", s(root.root()), "--tables-json", s(&meta)]);
    assert!(o.status.success());
    // The metadata lists all twelve; eleven are schema-only.
    assert_eq!(stdout_json(&o).as_array().unwrap().len(), 12);
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema only"));
}

#[test]
fn missing_root_is_an_input_error() {
    let o = skf(&["extract", "--db-root", "/definitely/not/here"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/definitely/not/here"));
    assert!(o.stdout.is_empty());
}

#[test]
fn bad_flags_are_input_errors() {
    assert_eq!(skf(&["evaluate", "--em-mode", "loose"]).status.code(), Some(2));
    assert_eq!(skf(&["stats"]).status.code(), Some(2));
    let root = build_fixtures(&["pets_1"]);
    let o = skf(&["generate", "--db-root", s(root.root()), "--jobs", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn generate_two_databases_one_per_kind() {
    let root = build_fixtures(&["pets_1", "dog_kennels"]);
    let out = TempDir::new().unwrap();
    let o = skf(&[
        "generate",
        "--db-root",
        s(root.root()),
        "--out-dir",
        s(out.path()),
        "--quota",
        "1",
        "--no-balance",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let recs = records(&out.path().join("corpus.jsonl"));
    assert_eq!(recs.len(), 18);
    let stats: CorpusStats = serde_json::from_str(&fs::read_to_string(out.path().join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats.total, 18);
    assert!(String::from_utf8_lossy(&o.stdout).contains("semantic 12 : schema 6"));

    // stats on a corpus with one record per kind per database.
    let one_db = TempDir::new().unwrap();
    let pets: Vec<String> = fs::read_to_string(out.path().join("corpus.jsonl"))
        .unwrap()
        .lines()
        .filter(|l| l.contains("\"db_id\":\"pets_1\""))
        .map(String::from)
        .collect();
    let path = one_db.path().join("c.jsonl");
    fs::write(&path, pets.join("\n") + "\n").unwrap();
    let o = skf(&["stats", "--corpus", s(&path)]);
    assert!(o.status.success());
    let report = stdout_json(&o);
    for k in TaskKind::ALL {
        assert_eq!(report["per_task_kind"][k.name()], 1, "{k}");
    }
}

#[test]
fn generate_is_byte_reproducible() {
    let root = build_spider_mini();
    let dirs: Vec<TempDir> = (0..3).map(|_| TempDir::new().unwrap()).collect();
    let run = |dir: &TempDir, jobs: &str| {
        let o = skf(&["generate", "--db-root", s(root.root()), "--out-dir", s(dir.path()), "--seed", "9", "--jobs", jobs]);
        assert!(o.status.success());
        fs::read(dir.path().join("corpus.jsonl")).unwrap()
    };
    let a = run(&dirs[0], "1");
    assert_eq!(a, run(&dirs[1], "1"));
    assert_eq!(a, run(&dirs[2], "8"));
    for f in ["contexts.jsonl", "stats.json"] {
        assert_eq!(fs::read(dirs[0].path().join(f)).unwrap(), fs::read(dirs[2].path().join(f)).unwrap());
    }
}

#[test]
fn stats_checks_a_generated_corpus() {
    let root = build_spider_mini();
    let out = TempDir::new().unwrap();
    assert!(skf(&["generate", "--db-root", s(root.root()), "--out-dir", s(out.path())]).status.success());
    let p = |f: &str| out.path().join(f);
    let o = skf(&[
        "stats",
        "--db-root",
        s(root.root()),
        "--corpus",
        s(&p("corpus.jsonl")),
        "--stats",
        s(&p("stats.json")),
        "--contexts",
        s(&p("contexts.jsonl")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout_json(&o);
    assert_eq!(r["stats_match"], true);
    assert_eq!(r["replay"]["clean"], true);
    assert_eq!(r["replay"]["rederived"], r["total"]);

    // A corrupted line is reported by number.
    let text = fs::read_to_string(p("corpus.jsonl")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[41] = "{\"instruction\": ";
    fs::write(p("bad.jsonl"), lines.join("\n")).unwrap();
    let o = skf(&["stats", "--corpus", s(&p("bad.jsonl"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.jsonl:42"));

    // A tampered answer fails re-derivation.
    let mut rec: TaskRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    rec.output.push('x');
    let tampered = serde_json::to_string(&rec).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[0] = &tampered;
    fs::write(p("tampered.jsonl"), lines.join("\n")).unwrap();
    let o = skf(&[
        "stats",
        "--db-root",
        s(root.root()),
        "--corpus",
        s(&p("tampered.jsonl")),
        "--contexts",
        s(&p("contexts.jsonl")),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stdout_json(&o)["replay"]["clean"], false);
}

#[test]
fn evaluate_gold_against_itself() {
    let root = build_spider_mini();
    let dir = TempDir::new().unwrap();
    let gold: Vec<Value> = serde_json::from_str(&fs::read_to_string(dev_json_path()).unwrap()).unwrap();
    let preds: Vec<&str> = gold.iter().map(|g| g["query"].as_str().unwrap()).collect();
    let pred = dir.path().join("pred.sql");
    fs::write(&pred, preds.join("\n") + "\n").unwrap();
    let report = dir.path().join("report.json");
    let verdicts = dir.path().join("verdicts.jsonl");
    let o = skf(&[
        "evaluate",
        "--db-root",
        s(root.root()),
        "--gold",
        s(&dev_json_path()),
        "--pred",
        s(&pred),
        "--out",
        s(&report),
        "--verdicts",
        s(&verdicts),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["em_rate"], 1.0);
    assert_eq!(r["ex_rate"], 1.0);
    assert_eq!(r["column_accuracy"]["rate"], 1.0);
    assert_eq!(fs::read_to_string(&verdicts).unwrap().lines().count(), gold.len());
}

#[test]
fn strict_mode_flips_reordered_select() {
    let root = build_fixtures(&["concert_singer"]);
    let dir = TempDir::new().unwrap();
    let gold = dir.path().join("gold.json");
    fs::write(
        &gold,
        r#"[{"db_id": "concert_singer", "question": "q", "query": "SELECT name, country FROM singer"}]"#,
    )
    .unwrap();
    let pred = dir.path().join("pred.sql");
    fs::write(&pred, "SELECT country, name FROM singer\n").unwrap();
    let em = |mode: &str| {
        let o = skf(&["evaluate", "--db-root", s(root.root()), "--gold", s(&gold), "--pred", s(&pred), "--em-mode", mode]);
        assert!(o.status.success());
        stdout_json(&o)["em_correct"].as_u64().unwrap()
    };
    assert_eq!(em("component"), 1);
    assert_eq!(em("strict"), 0);
}

#[test]
fn low_scores_still_exit_zero() {
    let root = build_fixtures(&["pets_1"]);
    let dir = TempDir::new().unwrap();
    let gold = dir.path().join("gold.json");
    fs::write(&gold, r#"[{"db_id": "pets_1", "query": "SELECT count(*) FROM pets"}]"#).unwrap();
    let pred = dir.path().join("pred.jsonl");
    fs::write(&pred, "{\"index\": 0, \"sql\": \"SELECT nothing FROM nowhere\"}\n").unwrap();
    let o = skf(&["evaluate", "--db-root", s(root.root()), "--gold", s(&gold), "--pred", s(&pred)]);
    assert!(o.status.success());
    let r = stdout_json(&o);
    assert_eq!(r["em_rate"], 0.0);
    assert_eq!(r["error_tally"]["exec_error_pred"], 1);

    fs::write(&pred, "{\"index\": 0, \"sql\": \n").unwrap();
    let o = skf(&["evaluate", "--db-root", s(root.root()), "--gold", s(&gold), "--pred", s(&pred)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn config_file_and_environment() {
    let root = build_fixtures(&["pets_1", "singer"]);
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("skf.toml");
    fs::write(
        &cfg,
        format!(
            "db_root = {:?}\noutput_path = {:?}\n[generation]\ndefault_quota = 2\nbalance_objectives = false\n",
            s(root.root()),
            s(&dir.path().join("out"))
        ),
    )
    .unwrap();
    let o = skf(&["generate", "--config", s(&cfg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(records(&dir.path().join("out/corpus.jsonl")).len(), 2 * 9 * 2);
    // The effective config is written next to the corpus and reloads.
    let effective = dir.path().join("out/config.toml");
    let o = Command::new(env!("CARGO_BIN_EXE_skf"))
        .args(["generate", "--config", s(&effective), "--out-dir", s(&dir.path().join("again"))])
        .env("SKF_GENERATION__DEFAULT_QUOTA", "1")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(records(&dir.path().join("again/corpus.jsonl")).len(), 2 * 9);
}

#[test]
fn stats_dumps_schema_and_ast() {
    let root = build_fixtures(&["pets_1"]);
    let o = skf(&["stats", "--db-root", s(root.root()), "--schema", "pets_1"]);
    assert!(o.status.success());
    assert_eq!(stdout_json(&o)["db_id"], "pets_1");
    let o = skf(&["stats", "--parse", "SELECT PetType FROM pets ORDER BY weight DESC LIMIT 1"]);
    assert!(o.status.success());
    assert_eq!(stdout_json(&o)["limit"], 1);
    assert_eq!(skf(&["stats", "--parse", "DROP TABLE pets"]).status.code(), Some(3));
}
