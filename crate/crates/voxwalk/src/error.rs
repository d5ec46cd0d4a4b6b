use thiserror::Error;

/// Errors produced across the voxwalk pipeline.
#[derive(Debug, Error)]
pub enum VoxwalkError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported element '{symbol}' at line {line}")]
    UnsupportedElement { line: usize, symbol: String },

    #[error("structure contains no usable atoms")]
    EmptyStructure,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("no mixture component matches pocket key '{0}'")]
    NoComponent(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("non-finite value at step {step}: {what}")]
    NonFinite { step: u64, what: String },

    #[error("training diverged at step {0}: loss is not finite")]
    Diverged(u64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, VoxwalkError>;
