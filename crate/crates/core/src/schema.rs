//! Database schema introspection.
//!
//! Reads SQLite database files and Spider-style `tables.json` metadata into a
//! uniform [`DatabaseSchema`], and streams table rows as [`RowSet`]s.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("not a database: {path}: {reason}")]
    NotADatabase { path: PathBuf, reason: String },
    #[error("failed to read schema of table `{table}`: {reason}")]
    SchemaRead { table: String, reason: String },
    #[error("malformed metadata in {db_id}: {reason}")]
    Format { db_id: String, reason: String },
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("failed to read rows of `{table}`: {reason}")]
    RowRead { table: String, reason: String },
    #[error("database `{0}` has no backing file")]
    NoBackingFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = SchemaError> = std::result::Result<T, E>;

/// Case-insensitive identifier equality.
pub fn ident_eq(a: &str, b: &str) -> bool {
    a.eq_ignore_ascii_case(b)
}

/// Coarse column type derived from the raw declared storage type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclaredType {
    Integer,
    Real,
    Text,
    Boolean,
    Datetime,
    Other(String),
}

impl DeclaredType {
    /// Maps a raw declared type with SQLite-affinity style substring rules.
    /// Total: anything unrecognized becomes `Other(raw)`.
    pub fn from_raw(raw: &str) -> Self {
        let up = raw.trim().to_ascii_uppercase();
        if up.contains("INT") {
            DeclaredType::Integer
        } else if up.contains("CHAR") || up.contains("CLOB") || up.contains("TEXT") {
            DeclaredType::Text
        } else if up.contains("BOOL") {
            DeclaredType::Boolean
        } else if up.contains("DATE") || up.contains("TIME") || up == "YEAR" {
            DeclaredType::Datetime
        } else if up.contains("REAL")
            || up.contains("FLOA")
            || up.contains("DOUB")
            // Spider metadata collapses all numeric columns to "number".
            || up == "NUMBER"
        {
            DeclaredType::Real
        } else {
            DeclaredType::Other(raw.trim().to_string())
        }
    }

    /// SQL type word used in training text, e.g. `INT`.
    pub fn sql_word(&self) -> &str {
        match self {
            DeclaredType::Integer => "INT",
            DeclaredType::Real => "REAL",
            DeclaredType::Text => "TEXT",
            DeclaredType::Boolean => "BOOLEAN",
            DeclaredType::Datetime => "DATETIME",
            DeclaredType::Other(raw) => raw,
        }
    }
}

impl fmt::Display for DeclaredType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.sql_word())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub declared_type: DeclaredType,
    pub nullable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForeignKey {
    pub from_table: String,
    pub from_column: String,
    pub to_table: String,
    pub to_column: String,
}

impl ForeignKey {
    /// True if this key connects `a` and `b` in either direction.
    pub fn links(&self, a: &str, b: &str) -> bool {
        (ident_eq(&self.from_table, a) && ident_eq(&self.to_table, b))
            || (ident_eq(&self.from_table, b) && ident_eq(&self.to_table, a))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<ColumnSchema>,
    pub primary_key: Vec<String>,
    pub foreign_keys: Vec<ForeignKey>,
}

impl TableSchema {
    pub fn column(&self, name: &str) -> Option<&ColumnSchema> {
        self.columns.iter().find(|c| ident_eq(&c.name, name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemaSource {
    DbFile { path: PathBuf },
    SpiderTablesJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatabaseSchema {
    pub db_id: String,
    pub tables: Vec<TableSchema>,
    pub source: SchemaSource,
}

impl DatabaseSchema {
    pub fn table(&self, name: &str) -> Option<&TableSchema> {
        self.tables.iter().find(|t| ident_eq(&t.name, name))
    }

    pub fn foreign_keys(&self) -> impl Iterator<Item = &ForeignKey> {
        self.tables.iter().flat_map(|t| t.foreign_keys.iter())
    }

    /// True if any table has a column with this name.
    pub fn has_column(&self, name: &str) -> bool {
        self.tables.iter().any(|t| t.column(name).is_some())
    }

    /// True if a foreign key links the two tables directly.
    pub fn tables_linked(&self, a: &str, b: &str) -> bool {
        self.foreign_keys().any(|fk| fk.links(a, b))
    }

    pub fn db_path(&self) -> Option<&Path> {
        match &self.source {
            SchemaSource::DbFile { path } => Some(path),
            SchemaSource::SpiderTablesJson => None,
        }
    }

    /// Checks the structural invariants: unique table and column names and
    /// foreign keys that resolve on both ends. Returns one message per violation.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for (i, t) in self.tables.iter().enumerate() {
            if self.tables[..i].iter().any(|o| ident_eq(&o.name, &t.name)) {
                problems.push(format!("duplicate table `{}`", t.name));
            }
            for (j, c) in t.columns.iter().enumerate() {
                if t.columns[..j].iter().any(|o| ident_eq(&o.name, &c.name)) {
                    problems.push(format!("duplicate column `{}.{}`", t.name, c.name));
                }
            }
        }
        for fk in self.foreign_keys() {
            let resolves = |table: &str, column: &str| {
                self.table(table).and_then(|t| t.column(column)).is_some()
            };
            if !resolves(&fk.from_table, &fk.from_column) || !resolves(&fk.to_table, &fk.to_column)
            {
                problems.push(format!(
                    "dangling foreign key {}.{} -> {}.{}",
                    fk.from_table, fk.from_column, fk.to_table, fk.to_column
                ));
            }
        }
        problems
    }
}

fn open_read_only(path: &Path) -> Result<Connection> {
    if !path.is_file() {
        return Err(SchemaError::FileNotFound(path.to_path_buf()));
    }
    let conn = Connection::open_with_flags(
        path,
        OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
    )
    .map_err(|e| SchemaError::NotADatabase {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok(conn)
}

/// Opens a read-only connection to the file behind a schema.
pub fn open_database(path: &Path) -> Result<Connection> {
    open_read_only(path)
}

fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

/// Introspects a database file. `db_id` defaults to the file stem.
pub fn load_database(path: &Path) -> Result<DatabaseSchema> {
    let db_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    load_database_as(path, &db_id)
}

pub fn load_database_as(path: &Path, db_id: &str) -> Result<DatabaseSchema> {
    let conn = open_read_only(path)?;
    let not_db = |e: rusqlite::Error| SchemaError::NotADatabase {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut stmt = conn
        .prepare(
            "SELECT name FROM sqlite_master WHERE type = 'table' \
             AND name NOT LIKE 'sqlite_%' ORDER BY rowid",
        )
        .map_err(not_db)?;
    let names: Vec<String> = stmt
        .query_map([], |r| r.get(0))
        .map_err(not_db)?
        .collect::<Result<_, _>>()
        .map_err(not_db)?;

    let mut tables = Vec::with_capacity(names.len());
    for name in &names {
        tables.push(read_table(&conn, name).map_err(|e| SchemaError::SchemaRead {
            table: name.clone(),
            reason: e.to_string(),
        })?);
    }
    let tables = resolve_foreign_keys(tables);
    Ok(DatabaseSchema {
        db_id: db_id.to_string(),
        tables,
        source: SchemaSource::DbFile {
            path: path.to_path_buf(),
        },
    })
}

/// A foreign key as SQLite reports it; the target column may be implicit.
struct RawForeignKey {
    from_column: String,
    to_table: String,
    to_column: Option<String>,
}

struct RawTable {
    schema: TableSchema,
    raw_fks: Vec<RawForeignKey>,
}

fn read_table(conn: &Connection, name: &str) -> rusqlite::Result<RawTable> {
    let mut columns = Vec::new();
    let mut pk: Vec<(i64, String)> = Vec::new();
    let mut stmt = conn.prepare(&format!("PRAGMA table_info({})", quote_ident(name)))?;
    let mut rows = stmt.query([])?;
    while let Some(row) = rows.next()? {
        let col: String = row.get(1)?;
        let ty: Option<String> = row.get(2)?;
        let notnull: i64 = row.get(3)?;
        let pk_pos: i64 = row.get(5)?;
        if pk_pos > 0 {
            pk.push((pk_pos, col.clone()));
        }
        columns.push(ColumnSchema {
            name: col,
            declared_type: DeclaredType::from_raw(ty.as_deref().unwrap_or("")),
            nullable: notnull == 0,
        });
    }
    pk.sort();

    let mut raw_fks = Vec::new();
    let mut stmt = conn.prepare(&format!("PRAGMA foreign_key_list({})", quote_ident(name)))?;
    let mut rows = stmt.query([])?;
    while let Some(row) = rows.next()? {
        raw_fks.push(RawForeignKey {
            to_table: row.get(2)?,
            from_column: row.get(3)?,
            to_column: row.get(4)?,
        });
    }
    // PRAGMA lists keys in reverse declaration order.
    raw_fks.reverse();

    Ok(RawTable {
        schema: TableSchema {
            name: name.to_string(),
            columns,
            primary_key: pk.into_iter().map(|(_, c)| c).collect(),
            foreign_keys: Vec::new(),
        },
        raw_fks,
    })
}

/// Resolves raw keys against the loaded tables, restoring original casing and
/// filling implicit targets with the parent's primary key. Keys whose ends do
/// not resolve are dropped with a warning.
fn resolve_foreign_keys(raw: Vec<RawTable>) -> Vec<TableSchema> {
    let schemas: Vec<TableSchema> = raw.iter().map(|t| t.schema.clone()).collect();
    let find = |name: &str| schemas.iter().find(|t| ident_eq(&t.name, name));
    let mut out = Vec::with_capacity(raw.len());
    for table in raw {
        let mut schema = table.schema;
        for fk in table.raw_fks {
            let Some(from_col) = schema.column(&fk.from_column).map(|c| c.name.clone()) else {
                log::warn!("{}: foreign key from unknown column {}", schema.name, fk.from_column);
                continue;
            };
            let Some(target) = find(&fk.to_table) else {
                log::warn!("{}: foreign key to unknown table {}", schema.name, fk.to_table);
                continue;
            };
            let to_col = match &fk.to_column {
                Some(c) => target.column(c).map(|c| c.name.clone()),
                None if target.primary_key.len() == 1 => Some(target.primary_key[0].clone()),
                None => None,
            };
            let Some(to_col) = to_col else {
                log::warn!(
                    "{}: foreign key to unresolvable column of {}",
                    schema.name,
                    target.name
                );
                continue;
            };
            let key = ForeignKey {
                from_table: schema.name.clone(),
                from_column: from_col,
                to_table: target.name.clone(),
                to_column: to_col,
            };
            if ident_eq(&key.from_table, &key.to_table) && ident_eq(&key.from_column, &key.to_column)
            {
                continue;
            }
            if !schema.foreign_keys.contains(&key) {
                schema.foreign_keys.push(key);
            }
        }
        out.push(schema);
    }
    out
}

/// Finds Spider-layout databases under `root`: `<root>/<db_id>/<db_id>.sqlite`.
/// Returned in db_id order.
pub fn discover_databases(root: &Path) -> Result<Vec<(String, PathBuf)>> {
    if !root.is_dir() {
        return Err(SchemaError::FileNotFound(root.to_path_buf()));
    }
    let mut found = Vec::new();
    for entry in fs::read_dir(root)? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let db_id = entry.file_name().to_string_lossy().into_owned();
        let file = entry.path().join(format!("{db_id}.sqlite"));
        if file.is_file() {
            found.push((db_id, file));
        }
    }
    found.sort();
    Ok(found)
}

/// Path of a database inside a Spider-layout root.
pub fn database_path(root: &Path, db_id: &str) -> PathBuf {
    root.join(db_id).join(format!("{db_id}.sqlite"))
}

// ---------------------------------------------------------------------------
// Spider tables.json
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum PrimaryKeyEntry {
    Single(usize),
    Composite(Vec<usize>),
}

/// One entry of a Spider `tables.json` file. `column_nullable` is an optional
/// extension; standard Spider files omit it.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpiderEntry {
    db_id: String,
    table_names_original: Vec<String>,
    #[serde(default)]
    table_names: Vec<String>,
    column_names_original: Vec<(i64, String)>,
    #[serde(default)]
    column_names: Vec<(i64, String)>,
    column_types: Vec<String>,
    #[serde(default)]
    primary_keys: Vec<PrimaryKeyEntry>,
    #[serde(default)]
    foreign_keys: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    column_nullable: Option<Vec<bool>>,
}

/// Reads a Spider `tables.json` file.
pub fn load_spider_tables(path: &Path) -> Result<Vec<DatabaseSchema>> {
    if !path.is_file() {
        return Err(SchemaError::FileNotFound(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    parse_spider_tables(&text)
}

pub fn parse_spider_tables(text: &str) -> Result<Vec<DatabaseSchema>> {
    let entries: Vec<SpiderEntry> =
        serde_json::from_str(text).map_err(|e| SchemaError::Format {
            db_id: "<file>".into(),
            reason: e.to_string(),
        })?;
    entries.into_iter().map(spider_entry_to_schema).collect()
}

fn spider_entry_to_schema(e: SpiderEntry) -> Result<DatabaseSchema> {
    let fmt_err = |reason: String| SchemaError::Format {
        db_id: e.db_id.clone(),
        reason,
    };
    if e.column_types.len() != e.column_names_original.len() {
        return Err(fmt_err(format!(
            "{} column types for {} columns",
            e.column_types.len(),
            e.column_names_original.len()
        )));
    }
    let mut tables: Vec<TableSchema> = e
        .table_names_original
        .iter()
        .map(|name| TableSchema {
            name: name.clone(),
            columns: Vec::new(),
            primary_key: Vec::new(),
            foreign_keys: Vec::new(),
        })
        .collect();

    // Global column index -> (table index, column name).
    let mut index: Vec<Option<(usize, String)>> = Vec::with_capacity(e.column_names_original.len());
    for (i, (t, name)) in e.column_names_original.iter().enumerate() {
        if *t < 0 {
            index.push(None);
            continue;
        }
        let t = *t as usize;
        let table = tables
            .get_mut(t)
            .ok_or_else(|| fmt_err(format!("column {i} refers to table index {t}")))?;
        let nullable = e
            .column_nullable
            .as_ref()
            .and_then(|n| n.get(i).copied())
            .unwrap_or(true);
        table.columns.push(ColumnSchema {
            name: name.clone(),
            declared_type: DeclaredType::from_raw(&e.column_types[i]),
            nullable,
        });
        index.push(Some((t, name.clone())));
    }
    let lookup = |i: usize| -> Result<(usize, String)> {
        index
            .get(i)
            .cloned()
            .flatten()
            .ok_or_else(|| fmt_err(format!("column index {i} out of range")))
    };

    for pk in &e.primary_keys {
        let cols = match pk {
            PrimaryKeyEntry::Single(i) => vec![*i],
            PrimaryKeyEntry::Composite(v) => v.clone(),
        };
        for i in cols {
            let (t, name) = lookup(i)?;
            tables[t].primary_key.push(name);
        }
    }
    for &(from, to) in &e.foreign_keys {
        let (ft, fc) = lookup(from)?;
        let (tt, tc) = lookup(to)?;
        let key = ForeignKey {
            from_table: tables[ft].name.clone(),
            from_column: fc,
            to_table: tables[tt].name.clone(),
            to_column: tc,
        };
        if ft == tt && ident_eq(&key.from_column, &key.to_column) {
            continue;
        }
        if !tables[ft].foreign_keys.contains(&key) {
            tables[ft].foreign_keys.push(key);
        }
    }
    Ok(DatabaseSchema {
        db_id: e.db_id,
        tables,
        source: SchemaSource::SpiderTablesJson,
    })
}

/// Serializes schemas in the Spider `tables.json` layout, including the
/// `column_nullable` extension so that reloading is lossless.
pub fn to_spider_tables_json(schemas: &[DatabaseSchema]) -> serde_json::Value {
    let entries: Vec<SpiderEntry> = schemas.iter().map(schema_to_spider_entry).collect();
    serde_json::to_value(entries).expect("spider entries serialize")
}

fn schema_to_spider_entry(db: &DatabaseSchema) -> SpiderEntry {
    let mut column_names = vec![(-1i64, "*".to_string())];
    let mut column_types = vec!["text".to_string()];
    let mut nullable = vec![false];
    let mut global: HashMap<(usize, String), usize> = HashMap::new();
    for (ti, t) in db.tables.iter().enumerate() {
        for c in &t.columns {
            global.insert((ti, c.name.to_ascii_lowercase()), column_names.len());
            column_names.push((ti as i64, c.name.clone()));
            column_types.push(c.declared_type.sql_word().to_string());
            nullable.push(c.nullable);
        }
    }
    let table_idx = |name: &str| db.tables.iter().position(|t| ident_eq(&t.name, name));
    let col_idx = |table: &str, col: &str| {
        table_idx(table).and_then(|ti| global.get(&(ti, col.to_ascii_lowercase())).copied())
    };
    let mut primary_keys = Vec::new();
    for t in &db.tables {
        let idx: Vec<usize> = t
            .primary_key
            .iter()
            .filter_map(|c| col_idx(&t.name, c))
            .collect();
        match idx.len() {
            0 => {}
            1 => primary_keys.push(PrimaryKeyEntry::Single(idx[0])),
            _ => primary_keys.push(PrimaryKeyEntry::Composite(idx)),
        }
    }
    let foreign_keys = db
        .foreign_keys()
        .filter_map(|fk| {
            Some((
                col_idx(&fk.from_table, &fk.from_column)?,
                col_idx(&fk.to_table, &fk.to_column)?,
            ))
        })
        .collect();
    SpiderEntry {
        db_id: db.db_id.clone(),
        table_names: db.tables.iter().map(|t| t.name.clone()).collect(),
        table_names_original: db.tables.iter().map(|t| t.name.clone()).collect(),
        column_names: column_names.clone(),
        column_names_original: column_names,
        column_types,
        primary_keys,
        foreign_keys,
        column_nullable: Some(nullable),
    }
}

/// Compact schema dump: `{db_id, tables:[{name, columns:[{name,type}], primary_key, foreign_keys}]}`.
pub fn schema_dump(db: &DatabaseSchema) -> serde_json::Value {
    serde_json::json!({
        "db_id": db.db_id,
        "tables": db.tables.iter().map(|t| serde_json::json!({
            "name": t.name,
            "columns": t.columns.iter().map(|c| serde_json::json!({
                "name": c.name,
                "type": c.declared_type.sql_word(),
            })).collect::<Vec<_>>(),
            "primary_key": t.primary_key,
            "foreign_keys": t.foreign_keys.iter().map(|fk| serde_json::json!({
                "from_table": fk.from_table,
                "from_column": fk.from_column,
                "to_table": fk.to_table,
                "to_column": fk.to_column,
            })).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    })
}

// ---------------------------------------------------------------------------
// Rows
// ---------------------------------------------------------------------------

/// A cell value tagged by its runtime storage class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", content = "v", rename_all = "snake_case")]
pub enum Cell {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

impl Cell {
    pub fn is_null(&self) -> bool {
        matches!(self, Cell::Null)
    }

    /// Null, or text that is empty after trimming whitespace.
    pub fn is_missing(&self) -> bool {
        match self {
            Cell::Null => true,
            Cell::Text(s) => s.trim().is_empty(),
            _ => false,
        }
    }

    /// Runtime number, or text that parses fully as a decimal number.
    pub fn is_numeric(&self) -> bool {
        match self {
            Cell::Int(_) | Cell::Real(_) => true,
            Cell::Text(s) => is_decimal_text(s),
            _ => false,
        }
    }

    /// Numeric value for number cells (text is not parsed).
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Real(r) => Some(*r),
            _ => None,
        }
    }

    /// Shortest round-trip rendering; `None` for nulls and blobs.
    pub fn render(&self) -> Option<String> {
        match self {
            Cell::Null | Cell::Blob(_) => None,
            Cell::Int(i) => Some(i.to_string()),
            Cell::Real(r) => Some(r.to_string()),
            Cell::Text(s) => Some(s.clone()),
        }
    }

    pub(crate) fn from_value_ref(v: ValueRef<'_>) -> Cell {
        match v {
            ValueRef::Null => Cell::Null,
            ValueRef::Integer(i) => Cell::Int(i),
            ValueRef::Real(r) => Cell::Real(r),
            ValueRef::Text(t) => Cell::Text(String::from_utf8_lossy(t).into_owned()),
            ValueRef::Blob(b) => Cell::Blob(b.to_vec()),
        }
    }
}

/// Text that reads as a plain decimal number: optional sign, digits with an
/// optional fraction, optional exponent.
pub fn is_decimal_text(s: &str) -> bool {
    let s = s.trim();
    let body = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    };
    let (int, frac) = match mantissa.split_once('.') {
        Some((a, b)) => (a, Some(b)),
        None => (mantissa, None),
    };
    let digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    let mantissa_ok = digits(int)
        && frac.is_none_or(digits)
        && !(int.is_empty() && frac.is_none_or(str::is_empty));
    let exponent_ok = exponent.is_none_or(|e| {
        let e = e.strip_prefix(['+', '-']).unwrap_or(e);
        !e.is_empty() && digits(e)
    });
    mantissa_ok && exponent_ok
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSet {
    pub table: String,
    pub column_order: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl RowSet {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_order.iter().position(|c| ident_eq(c, name))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Reads up to `limit` rows of a table in storage order.
pub fn fetch_rows(db: &DatabaseSchema, table: &str, limit: Option<usize>) -> Result<RowSet> {
    let path = db
        .db_path()
        .ok_or_else(|| SchemaError::NoBackingFile(db.db_id.clone()))?;
    let conn = open_read_only(path)?;
    fetch_rows_with(&conn, db, table, limit)
}

/// Like [`fetch_rows`] over an already open connection.
pub fn fetch_rows_with(
    conn: &Connection,
    db: &DatabaseSchema,
    table: &str,
    limit: Option<usize>,
) -> Result<RowSet> {
    let schema = db
        .table(table)
        .ok_or_else(|| SchemaError::UnknownTable(table.to_string()))?;
    let row_err = |e: rusqlite::Error| SchemaError::RowRead {
        table: schema.name.clone(),
        reason: e.to_string(),
    };
    let column_order: Vec<String> = schema.columns.iter().map(|c| c.name.clone()).collect();
    let select_list = column_order
        .iter()
        .map(|c| quote_ident(c))
        .collect::<Vec<_>>()
        .join(", ");
    let mut sql = format!("SELECT {select_list} FROM {}", quote_ident(&schema.name));
    if let Some(n) = limit {
        sql.push_str(&format!(" LIMIT {n}"));
    }
    let mut stmt = conn.prepare(&sql).map_err(row_err)?;
    let width = column_order.len();
    let mut rows = Vec::new();
    let mut q = stmt.query([]).map_err(row_err)?;
    while let Some(r) = q.next().map_err(row_err)? {
        let mut cells = Vec::with_capacity(width);
        for i in 0..width {
            cells.push(Cell::from_value_ref(r.get_ref(i).map_err(row_err)?));
        }
        rows.push(cells);
    }
    Ok(RowSet {
        table: schema.name.clone(),
        column_order,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn declared_type_mapping() {
        assert_eq!(DeclaredType::from_raw("INTEGER"), DeclaredType::Integer);
        assert_eq!(DeclaredType::from_raw("bigint"), DeclaredType::Integer);
        assert_eq!(DeclaredType::from_raw("varchar(20)"), DeclaredType::Text);
        assert_eq!(DeclaredType::from_raw("CLOB"), DeclaredType::Text);
        assert_eq!(DeclaredType::from_raw("number"), DeclaredType::Real);
        assert_eq!(DeclaredType::from_raw("double precision"), DeclaredType::Real);
        assert_eq!(DeclaredType::from_raw("boolean"), DeclaredType::Boolean);
        assert_eq!(DeclaredType::from_raw("DATETIME"), DeclaredType::Datetime);
        assert_eq!(DeclaredType::from_raw("time"), DeclaredType::Datetime);
        assert_eq!(
            DeclaredType::from_raw("NUMERIC(10,2)"),
            DeclaredType::Other("NUMERIC(10,2)".into())
        );
        assert_eq!(DeclaredType::from_raw(""), DeclaredType::Other(String::new()));
    }

    #[test]
    fn sql_words_round_trip_through_mapping() {
        for t in [
            DeclaredType::Integer,
            DeclaredType::Real,
            DeclaredType::Text,
            DeclaredType::Boolean,
            DeclaredType::Datetime,
            DeclaredType::Other("NUMERIC(10,2)".into()),
        ] {
            assert_eq!(DeclaredType::from_raw(t.sql_word()), t);
        }
    }

    #[test]
    fn decimal_text() {
        for s in ["1", "-2.5", "+3.", ".5", "1e10", "2.5E-3", " 42 "] {
            assert!(is_decimal_text(s), "{s}");
        }
        for s in ["", ".", "-", "1e", "abc", "1.2.3", "inf", "NaN", "0x10", "12a"] {
            assert!(!is_decimal_text(s), "{s}");
        }
    }

    #[test]
    fn missing_and_rendering() {
        assert!(Cell::Null.is_missing());
        assert!(Cell::Text("  ".into()).is_missing());
        assert!(!Cell::Int(0).is_missing());
        assert_eq!(Cell::Real(3.0).render().as_deref(), Some("3"));
        assert_eq!(Cell::Real(0.1).render().as_deref(), Some("0.1"));
        assert_eq!(Cell::Int(-7).render().as_deref(), Some("-7"));
        assert_eq!(Cell::Blob(vec![1]).render(), None);
    }

    #[test]
    fn spider_index_out_of_range_names_db() {
        let text = r#"[{"db_id":"broken","table_names_original":["a"],
            "column_names_original":[[-1,"*"],[0,"x"]],"column_types":["text","number"],
            "primary_keys":[],"foreign_keys":[[1,9]]}]"#;
        match parse_spider_tables(text) {
            Err(SchemaError::Format { db_id, .. }) => assert_eq!(db_id, "broken"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spider_malformed_json() {
        assert!(matches!(
            parse_spider_tables("{not json"),
            Err(SchemaError::Format { .. })
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_database(Path::new("/nonexistent/x.sqlite")),
            Err(SchemaError::FileNotFound(_))
        ));
    }
}
