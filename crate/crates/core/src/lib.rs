//! Corpus construction and evaluation for schema-aware Text-to-SQL training.
//!
//! The crate turns SQLite databases into instruction-format training records
//! that teach a model the schema and cell values of those databases, and
//! scores predicted SQL with exact match, execution match and column-name
//! accuracy.

pub mod eval;
pub mod kmeans;
pub mod sampler;
pub mod schema;
pub mod sql;
pub mod tasks;
#[cfg(feature = "testkit")]
pub mod testkit;

pub use sampler::{SamplerConfig, SubTable, ValueSample};
pub use schema::{Cell, ColumnSchema, DatabaseSchema, DeclaredType, ForeignKey, RowSet, TableSchema};
