//! Fixture databases for tests and benches.
//!
//! The fixtures ship as SQL scripts under `fixtures/spider_mini/database`;
//! these helpers materialize them as SQLite files in Spider layout
//! (`<root>/<db_id>/<db_id>.sqlite`) inside a temporary directory.

use std::fs;
use std::path::{Path, PathBuf};

use rusqlite::Connection;
use tempfile::TempDir;

use crate::schema::{database_path, discover_databases, load_database_as, DatabaseSchema};

/// `fixtures/` of this crate.
pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn spider_mini_dir() -> PathBuf {
    fixture_dir().join("spider_mini")
}

/// Gold queries over the fixture databases in Spider `dev.json` format.
pub fn dev_json_path() -> PathBuf {
    spider_mini_dir().join("dev.json")
}

pub fn cases_dir() -> PathBuf {
    fixture_dir().join("cases")
}

/// Ids of all fixture databases, sorted.
pub fn fixture_db_ids() -> Vec<String> {
    let mut ids: Vec<String> = fs::read_dir(spider_mini_dir().join("database"))
        .expect("fixture database directory")
        .filter_map(|e| e.ok())
        .filter(|e| e.path().join("schema.sql").is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    ids.sort();
    ids
}

/// Runs a SQL script into a fresh database file, replacing any existing one.
pub fn build_database(script: &str, out: &Path) -> Result<(), Box<dyn std::error::Error>> {
    if let Some(dir) = out.parent() {
        fs::create_dir_all(dir)?;
    }
    if out.exists() {
        fs::remove_file(out)?;
    }
    let conn = Connection::open(out)?;
    conn.execute_batch(script)?;
    conn.close().map_err(|(_, e)| e)?;
    Ok(())
}

/// A Spider-layout database root that lives as long as this value.
pub struct FixtureRoot {
    dir: TempDir,
}

impl FixtureRoot {
    pub fn empty() -> Self {
        FixtureRoot {
            dir: tempfile::tempdir().expect("temporary directory"),
        }
    }

    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    /// Adds a database built from a SQL script.
    pub fn add(&self, db_id: &str, script: &str) -> PathBuf {
        let path = database_path(self.root(), db_id);
        build_database(script, &path).unwrap_or_else(|e| panic!("building {db_id}: {e}"));
        path
    }

    pub fn path_of(&self, db_id: &str) -> PathBuf {
        database_path(self.root(), db_id)
    }

    /// Introspects every database under the root, in db_id order.
    pub fn schemas(&self) -> Vec<DatabaseSchema> {
        discover_databases(self.root())
            .expect("fixture root")
            .into_iter()
            .map(|(id, path)| load_database_as(&path, &id).expect("fixture database"))
            .collect()
    }

    pub fn schema(&self, db_id: &str) -> DatabaseSchema {
        load_database_as(&self.path_of(db_id), db_id).expect("fixture database")
    }
}

/// Script of one shipped fixture database.
pub fn fixture_script(db_id: &str) -> String {
    let path = spider_mini_dir().join("database").join(db_id).join("schema.sql");
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Builds the given shipped fixture databases.
pub fn build_fixtures(ids: &[&str]) -> FixtureRoot {
    let root = FixtureRoot::empty();
    for id in ids {
        root.add(id, &fixture_script(id));
    }
    root
}

/// Builds every shipped fixture database.
pub fn build_spider_mini() -> FixtureRoot {
    let ids = fixture_db_ids();
    let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    build_fixtures(&refs)
}
