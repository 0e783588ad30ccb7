use thiserror::Error;

/// Errors produced by the modeling routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unit index ({m}, {n}) outside a {rows}x{cols} array")]
    IndexOutOfRange {
        m: usize,
        n: usize,
        rows: usize,
        cols: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("quantization mismatch: {a} bits vs {b} bits")]
    QuantizationMismatch { a: u8, b: u8 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("codeword format error at byte offset {offset}: {reason}")]
    Format { offset: usize, reason: String },

    #[error("unsupported bit width {0}; expected one of 1, 2, 4, 8")]
    UnsupportedBitWidth(u8),

    #[error("rank-deficient fit: {0}")]
    RankDeficient(String),

    #[error("unit mismatch: model regressor is in {model}, caller supplied {supplied}")]
    UnitMismatch {
        model: &'static str,
        supplied: &'static str,
    },

    #[error("reference estimate is degenerate (|x|^2 = {0:e})")]
    DegenerateReference(f64),

    #[error("empty window around {center} deg (+/- {half_width} deg)")]
    EmptyWindow { center: f64, half_width: f64 },

    #[error("beamwidth undefined: 1.391*lambda/(pi*N*d) = {0} exceeds 1")]
    BeamwidthUndefined(f64),

    #[error("singular matrix")]
    Singular,

    #[error("ill-conditioned matrix: 1-norm condition {cond:e} above {limit:e}")]
    IllConditioned { cond: f64, limit: f64 },

    #[error("default phase {0} rad is not on the {1}-bit level grid")]
    OffGrid(f64, u8),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
