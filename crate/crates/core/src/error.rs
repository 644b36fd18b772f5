use std::io;

#[derive(thiserror::Error, Debug)]
pub enum Error {
    #[error("bad magic: not an OODEMB1 file")]
    BadMagic,
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("label {label} out of range for {classes} classes")]
    BadLabel { label: i64, classes: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("zero vector cannot be normalized")]
    ZeroVector,
    #[error("class {0} has no labeled records")]
    EmptyClass(usize),
    #[error("set has no labeled records")]
    NoLabels,
    #[error("class count mismatch: {0} vs {1}")]
    ClassCountMismatch(usize, usize),
    #[error("class index {class} invalid for {classes} classes")]
    BadClass { class: usize, classes: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimMismatch { expected, found })
    }
}
