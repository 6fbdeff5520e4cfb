use std::path::PathBuf;

use thiserror::Error;

use crate::volume::FieldKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("expected a {expected:?} field, got {found:?}")]
    WrongFieldKind { expected: FieldKind, found: FieldKind },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{path}: bad NIfTI magic {magic:?}")]
    BadMagic { path: PathBuf, magic: [u8; 4] },
    #[error("{path}: unsupported NIfTI datatype code {code}")]
    UnsupportedDatatype { path: PathBuf, code: i16 },
    #[error("{path}: expected a 3D volume, header says dim[0] = {ndim}")]
    NotThreeDimensional { path: PathBuf, ndim: i16 },
    #[error("{path}: truncated file ({detail})")]
    Truncated { path: PathBuf, detail: String },
    #[error("{path}: malformed header ({detail})")]
    MalformedHeader { path: PathBuf, detail: String },

    #[error("{path}: missing column {column:?}")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: line {line}: cannot parse {field} from {value:?}")]
    Parse { path: PathBuf, line: u64, field: &'static str, value: String },
    #[error("{path}: line {line}: {detail}")]
    Validation { path: PathBuf, line: u64, detail: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
