use std::path::PathBuf;

use thiserror::Error;

use crate::volume::Dims;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimMismatch(Dims, Dims),

    #[error("classes absent from every source: {0:?}")]
    MissingClasses(Vec<u8>),

    #[error("unknown class id {0}")]
    UnknownClass(u8),

    #[error("shape {shape:?} does not fit in scene {scene:?}")]
    ShapeTooLarge { shape: Dims, scene: Dims },

    #[error("no instance could be placed in the scene")]
    EmptyScene,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("graph line {line}: {msg}")]
    Graph { line: usize, msg: String },

    #[error("anchor table line {line}: {msg}")]
    AnchorTable { line: usize, msg: String },

    #[error("bad NIfTI magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported two-file NIfTI (magic \"ni1\")")]
    TwoFileNifti,

    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),

    #[error("unsupported NIfTI dimensionality: dim = {0:?}")]
    UnsupportedDim([i16; 8]),

    #[error("truncated NIfTI payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("label value {0} outside 0..=255")]
    LabelRange(i64),

    #[error("datatype {datatype} cannot store {kind} data")]
    IncompatibleDatatype { datatype: &'static str, kind: &'static str },

    #[error("malformed bank file: {0}")]
    BankFormat(String),

    #[error("malformed scene manifest {path}: {msg}")]
    Manifest { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
