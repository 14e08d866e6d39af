//! Exit-code classes: 2 input, 3 data format, 4 internal.

use std::fmt;

use skf_core::eval::EvalError;
use skf_core::schema::SchemaError;
use skf_core::tasks::{GenerationError, TemplateError};

#[derive(Debug)]
pub enum Failure {
    Input(String),
    Format(String),
    Internal(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Format(_) => 3,
            Failure::Internal(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) => write!(f, "input error: {m}"),
            Failure::Format(m) => write!(f, "data format error: {m}"),
            Failure::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<SchemaError> for Failure {
    fn from(e: SchemaError) -> Self {
        match e {
            SchemaError::FileNotFound(_)
            | SchemaError::NotADatabase { .. }
            | SchemaError::SchemaRead { .. }
            | SchemaError::UnknownTable(_)
            | SchemaError::NoBackingFile(_) => Failure::Input(e.to_string()),
            SchemaError::Format { .. } => Failure::Format(e.to_string()),
            SchemaError::RowRead { .. } | SchemaError::Io(_) => Failure::Internal(e.to_string()),
        }
    }
}

impl From<TemplateError> for Failure {
    fn from(e: TemplateError) -> Self {
        match e {
            TemplateError::Io { .. } => Failure::Input(e.to_string()),
            TemplateError::MissingPlaceholder(_) => Failure::Internal(e.to_string()),
            _ => Failure::Format(e.to_string()),
        }
    }
}

impl From<GenerationError> for Failure {
    fn from(e: GenerationError) -> Self {
        match e {
            GenerationError::Schema(e) => e.into(),
            GenerationError::Template(e) => e.into(),
            GenerationError::Config(m) => Failure::Input(m),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::DatabaseUnavailable { .. } | EvalError::Io { .. } | EvalError::Config(_) => {
                Failure::Input(e.to_string())
            }
            EvalError::Format { .. } => Failure::Format(e.to_string()),
            EvalError::GoldFailed(_) => Failure::Internal(e.to_string()),
        }
    }
}

/// Output could not be written.
pub fn write_failed(path: &std::path::Path, e: impl fmt::Display) -> Failure {
    Failure::Internal(format!("cannot write {}: {e}", path.display()))
}
