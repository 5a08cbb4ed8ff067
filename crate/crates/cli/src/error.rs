use std::fmt;
use std::path::Path;

use cmm_core::CmmError;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const DATA: i32 = 2;
    pub const NUMERIC: i32 = 3;
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Self::Data(msg.into())
    }

    /// An invalid model structure is reported as a data problem.
    pub fn structure(msg: impl Into<String>) -> Self {
        Self::Data(format!("invalid model structure: {}", msg.into()))
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::Data(format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => exit::USAGE,
            Self::Data(_) => exit::DATA,
            Self::Numeric(_) => exit::NUMERIC,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Data(m) | Self::Numeric(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CmmError> for CliError {
    fn from(e: CmmError) -> Self {
        let msg = e.to_string();
        match e {
            CmmError::Data(_) | CmmError::Csv(_) | CmmError::Io(_) | CmmError::Structure(_) => Self::Data(msg),
            CmmError::Domain(_) => Self::Usage(msg),
            CmmError::Numeric(_) | CmmError::EmptyClass { .. } | CmmError::Estimation(_) => Self::Numeric(msg),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Data(e.to_string())
    }
}
