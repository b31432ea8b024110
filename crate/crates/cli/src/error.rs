use std::path::PathBuf;

use countimpute_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Data(#[from] DataError),
    #[error("{0}")]
    Numeric(CoreError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(msg) => CliError::Config(ConfigError::Invalid(msg)),
            CoreError::EmptyStratum(_) | CoreError::Incomplete => CliError::Data(DataError::Core(e)),
            other => CliError::Numeric(other),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key '{key}'{}", location(*.line))]
    UnknownKey { key: String, line: Option<usize> },
    #[error("key '{key}'{}: {message}", location(*.line))]
    Value { key: String, line: Option<usize>, message: String },
    #[error("missing required key '{0}'")]
    Missing(&'static str),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn location(line: Option<usize>) -> String {
    match line {
        Some(l) => format!(" (line {l})"),
        None => " (command line)".to_string(),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{path}, line {line}: {message}")]
    Row { path: String, line: u64, message: String },
    #[error("{path}, line {line}: negative count {value}")]
    NegativeCount { path: String, line: u64, value: i64 },
    #[error("{0}")]
    Core(CoreError),
    #[error("chi-square test needs at least two bins after merging, got {0}")]
    InsufficientSupport(usize),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}
