//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("band count mismatch: image has {image} bands, library has {library}")]
    BandMismatch { image: usize, library: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("region size {region_size} too large: {region_size}^2 must be smaller than {pixels} pixels")]
    RegionTooLarge { region_size: usize, pixels: usize },

    #[error("invalid cluster count {k}: need 1 <= k < {pixels}")]
    InvalidK { k: usize, pixels: usize },

    #[error("matrix has {actual} pixel columns, segment map covers {expected}")]
    PixelCountMismatch { expected: usize, actual: usize },

    #[error("matrix has {actual} columns, segment map has {expected} segments")]
    SegmentCountMismatch { expected: usize, actual: usize },

    #[error("normal matrix is not positive definite (pivot {pivot:e} at column {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("zero spectrum has no direction")]
    ZeroSpectrum,

    #[error(
        "library generation exhausted after {rejections} consecutive rejections \
         (min angle {min_angle_deg} deg is too strict for {count} signatures)"
    )]
    GenerationExhausted {
        rejections: usize,
        min_angle_deg: f64,
        count: usize,
    },

    #[error("square layout does not fit: {0}")]
    SquaresDontFit(String),

    #[error("truth abundances are identically zero")]
    ZeroTruth,

    #[error("signature {index} is not covered by the material map")]
    UnmappedSignature { index: usize },

    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { found: String, expected: &'static str },

    #[error("truncated data: expected {expected_bytes} bytes, found {found_bytes}")]
    TruncatedData {
        expected_bytes: usize,
        found_bytes: usize,
    },

    #[error("header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("ragged row {row}: expected {expected} fields, found {found}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-numeric value {value:?} at row {row}")]
    NonNumeric { row: usize, value: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors raised while reading or writing files (as opposed to
    /// validation of in-memory data). The CLI maps these to exit code 2.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::BadMagic { .. }
                | Error::TruncatedData { .. }
                | Error::HeaderMismatch(_)
                | Error::RaggedRows { .. }
                | Error::NonNumeric { .. }
        )
    }
}
