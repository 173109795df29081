//! CLI error type and its mapping to process exit codes.

use std::path::PathBuf;

use polarmac::codec::CodecError;
use polarmac::gfq::GfError;
use polarmac::linear_mac::LinearMacError;
use polarmac::mac::MacError;
use polarmac::polarize::PolarizeError;
use polarmac::subspace::SubspaceError;
use thiserror::Error;

/// Exit code for invalid input or configuration.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code when a size or depth cap is exceeded.
pub const EXIT_SIZE_CAP: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("bad grid: {0}")]
    BadGrid(String),
    #[error("size cap exceeded: {0}")]
    SizeCap(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::SizeCap(_) => EXIT_SIZE_CAP,
            _ => EXIT_CONFIG,
        }
    }

    pub fn parse(path: &std::path::Path, e: &serde_json::Error) -> Self {
        CliError::Parse { path: path.to_path_buf(), line: e.line(), column: e.column(), message: e.to_string() }
    }
}

impl From<MacError> for CliError {
    fn from(e: MacError) -> Self {
        match e {
            MacError::TooLarge { .. } => CliError::SizeCap(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<LinearMacError> for CliError {
    fn from(e: LinearMacError) -> Self {
        match e {
            LinearMacError::TooLarge { .. } | LinearMacError::TooDeep { .. } => CliError::SizeCap(e.to_string()),
            LinearMacError::Subspace(s) => s.into(),
            LinearMacError::Mac(m) => m.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<PolarizeError> for CliError {
    fn from(e: PolarizeError) -> Self {
        match e {
            PolarizeError::TooLarge { .. } | PolarizeError::TooDeep(_) => CliError::SizeCap(e.to_string()),
            PolarizeError::Mac(m) => m.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SubspaceError> for CliError {
    fn from(e: SubspaceError) -> Self {
        match e {
            SubspaceError::TooLarge { .. } => CliError::SizeCap(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<GfError> for CliError {
    fn from(e: GfError) -> Self {
        CliError::Config(e.to_string())
    }
}
