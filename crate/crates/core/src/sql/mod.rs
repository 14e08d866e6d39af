//! Restricted SQL dialect: parsing, printing, canonicalization and column
//! reference extraction for Spider-style queries.

mod ast;
mod canon;
mod lexer;
mod parser;
mod refs;

use std::fmt;

use thiserror::Error;

pub use ast::*;
pub use canon::{canonicalize, canonicalize_with, CanonMode};
pub use parser::{is_reserved, parse_sql};
pub use refs::{extract_column_refs, ColumnRef};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// Character offset of the offending token.
    pub position: usize,
    pub found: String,
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at position {}: found {}", self.position, self.found)?;
        if !self.expected.is_empty() {
            write!(f, ", expected one of: {}", self.expected.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlError {
    #[error("parse error {0}")]
    Parse(ParseError),
    #[error("unsupported feature at position {position}: {feature}")]
    Unsupported { feature: String, position: usize },
}

impl From<ParseError> for SqlError {
    fn from(e: ParseError) -> Self {
        SqlError::Parse(e)
    }
}
