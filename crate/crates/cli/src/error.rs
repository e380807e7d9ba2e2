use std::fmt;
use std::io;
use std::path::Path;

use mmof::algos::AlgoError;
use mmof::dataset::DatasetError;
use mmof::env::EnvError;
use mmof::evaluator::EvalError;
use mmof::ladder::LadderError;
use mmof::sampler::SamplerError;

/// Failure classes, each with its own exit status (see docs/cli.md).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    Runtime,
    Usage,
    MissingFile,
    SchemaMismatch,
    InvalidConfig,
    ValidationFailed,
    Io,
}

impl Category {
    pub fn code(self) -> i32 {
        match self {
            Category::Runtime => 1,
            Category::Usage => 2,
            Category::MissingFile => 3,
            Category::SchemaMismatch => 4,
            Category::InvalidConfig => 5,
            Category::ValidationFailed => 6,
            Category::Io => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Runtime => "runtime",
            Category::Usage => "usage",
            Category::MissingFile => "missing_file",
            Category::SchemaMismatch => "schema_mismatch",
            Category::InvalidConfig => "invalid_config",
            Category::ValidationFailed => "validation_failed",
            Category::Io => "io",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl CliError {
    pub fn new(category: Category, message: impl Into<String>) -> Self {
        CliError { category, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError::new(Category::InvalidConfig, message)
    }

    pub fn io(path: &Path, e: io::Error) -> Self {
        let category = if e.kind() == io::ErrorKind::NotFound { Category::MissingFile } else { Category::Io };
        CliError::new(category, format!("{}: {e}", path.display()))
    }

    /// The single stderr line printed on failure.
    pub fn line(&self) -> String {
        let msg: String = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error[{}]: {msg}", self.category.name())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io { path, source } => CliError::io(&path, source),
            other => CliError::new(Category::SchemaMismatch, other.to_string()),
        }
    }
}

impl From<AlgoError> for CliError {
    fn from(e: AlgoError) -> Self {
        let category = match &e {
            AlgoError::Io(io) if io.kind() == io::ErrorKind::NotFound => Category::MissingFile,
            AlgoError::Io(_) => Category::Io,
            AlgoError::Checkpoint(_) | AlgoError::Incompatible { .. } => Category::SchemaMismatch,
            AlgoError::Config(_) | AlgoError::Unknown(_) => Category::InvalidConfig,
            AlgoError::Nn(_) | AlgoError::NonFinite(_) => Category::Runtime,
        };
        CliError::new(category, e.to_string())
    }
}

impl From<EnvError> for CliError {
    fn from(e: EnvError) -> Self {
        let category = if matches!(e, EnvError::Config { .. }) { Category::InvalidConfig } else { Category::Runtime };
        CliError::new(category, e.to_string())
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::Recipe(m) => CliError::config(m),
            SamplerError::Checkpoint { path, source } => {
                let inner = CliError::from(source);
                CliError::new(inner.category, format!("checkpoint {}: {}", path.display(), inner.message))
            }
            SamplerError::EnvMismatch(m) => CliError::new(Category::SchemaMismatch, m),
            SamplerError::Env(e) => e.into(),
            SamplerError::Dataset(e) => e.into(),
            SamplerError::Pool(m) => CliError::new(Category::Runtime, m),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Config(m) => CliError::config(m),
            EvalError::Policy(e) => e.into(),
            EvalError::Env(e) => e.into(),
        }
    }
}

impl From<LadderError> for CliError {
    fn from(e: LadderError) -> Self {
        match e {
            LadderError::Env(e) => e.into(),
            other => CliError::config(other.to_string()),
        }
    }
}
