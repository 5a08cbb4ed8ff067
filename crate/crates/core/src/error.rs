use thiserror::Error;

/// Errors raised by the library.
///
/// The variants are grouped the way the command-line front end reports them:
/// data problems, structural (spec) problems, and numerical or estimation
/// failures.
#[derive(Debug, Error)]
pub enum CmmError {
    #[error("data error: {0}")]
    Data(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid model structure: {0}")]
    Structure(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("degenerate fit: class {class} is empty")]
    EmptyClass { class: usize },

    #[error("estimation failed: {0}")]
    Estimation(String),
}

pub type Result<T> = std::result::Result<T, CmmError>;
