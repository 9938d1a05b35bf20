//! Error types shared across the crate.

use thiserror::Error;

use crate::grid::GridKind;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid dims {dims:?} overflow the addressable size")]
    DimsOverflow { dims: [usize; 3] },
    #[error("grid dims {dims:?} contain a zero extent")]
    ZeroDim { dims: [usize; 3] },
    #[error("data length {got} does not match dims product {expected}")]
    DataLength { expected: usize, got: usize },
    #[error("spacing {spacing:?} must be strictly positive and finite")]
    BadSpacing { spacing: [f64; 3] },
    #[error("mask grid contains non-binary value {value}")]
    BadMaskValue { value: f32 },
    #[error("probability grid contains out-of-range value {value}")]
    BadProbabilityValue { value: f32 },
    #[error("expected {expected:?} grid, got {got:?}")]
    KindMismatch { expected: GridKind, got: GridKind },
    #[error("grid dims mismatch: {a:?} vs {b:?}")]
    DimsMismatch { a: [usize; 3], b: [usize; 3] },
    #[error("mask is empty")]
    EmptyMask,
    #[error("bounding box {bbox} exceeds grid dims {dims:?}")]
    BoxOutOfRange { bbox: String, dims: [usize; 3] },
    #[error("grid dims {dims:?} exceed canvas dims {canvas:?}")]
    GridLargerThanCanvas {
        dims: [usize; 3],
        canvas: [usize; 3],
    },
    #[error("placement is inconsistent: {reason}")]
    BadPlacement { reason: String },
    #[error("target dims {target:?} invalid for source dims {from:?}: {reason}")]
    BadResampleTarget {
        from: [usize; 3],
        target: [usize; 3],
        reason: &'static str,
    },
}

#[derive(Debug, Error)]
pub enum NrrdError {
    #[error("missing NRRD magic line")]
    BadMagic,
    #[error("malformed header line: {line:?}")]
    MalformedHeader { line: String },
    #[error("missing required header field `{field}`")]
    MissingField { field: &'static str },
    #[error("unsupported value for `{field}`: {value}")]
    Unsupported { field: &'static str, value: String },
    #[error("invalid value for `{field}`: {value}")]
    InvalidField { field: &'static str, value: String },
    #[error("payload length {got} does not match sizes field product ({expected} bytes)")]
    PayloadLength { expected: usize, got: usize },
    #[error("gzip payload: {0}")]
    Gzip(String),
    #[error("grid invariant violated: {0}")]
    Grid(#[from] GridError),
    #[error("cannot serialize a {kind:?} grid as NRRD; binarize or quantize first")]
    UnsupportedKind { kind: GridKind },
}
