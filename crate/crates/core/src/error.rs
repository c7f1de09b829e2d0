use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("track file line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("storm {storm_id}: {message}")]
    Validation { storm_id: String, message: String },
    #[error("time {t} h outside track range [{first}, {last}]")]
    OutOfRange { t: f64, first: f64, last: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum ForcingError {
    #[error("ambient pressure {p_n} hPa must exceed central pressure {p_c} hPa")]
    InvalidIntensity { p_c: f64, p_n: f64 },
    #[error("radius must be positive, got {0} km")]
    Domain(f64),
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid configuration: {0}")]
    Config(String),
    #[error("invalid mesh: {0}")]
    Mesh(String),
    #[error("mesh file line {line}: {message}")]
    MeshParse { line: usize, message: String },
    #[error("storm {storm_id} does not cover the forcing window [{start}, {end}] h (track spans [{first}, {last}])")]
    WindowCoverage {
        storm_id: String,
        start: f64,
        end: f64,
        first: f64,
        last: f64,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Forcing(#[from] ForcingError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("metric undefined: {0}")]
    Undefined(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Tensor file decoding failures; `offset` is the byte position where decoding stopped.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic at offset {offset}: expected \"SRGT\"")]
    BadMagic { offset: usize },
    #[error("unsupported version {version} at offset {offset}")]
    BadVersion { offset: usize, version: u32 },
    #[error("unsupported dtype code {code} at offset {offset}")]
    BadDtype { offset: usize, code: u8 },
    #[error("invalid dims at offset {offset}: {message}")]
    BadDims { offset: usize, message: String },
    #[error("truncated file at offset {offset}: needed {needed} more bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("trailing {extra} bytes after payload at offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}
