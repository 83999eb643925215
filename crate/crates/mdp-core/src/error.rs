//! Crate-wide error type.

use thiserror::Error;

/// Byte-level reasons a binary artifact file is rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum FormatErrorKind {
    /// First four bytes are not the expected magic.
    BadMagic,
    /// Version byte does not match the layout the reader expects.
    VersionMismatch { expected: u8, found: u8 },
    /// File ends before a field is complete.
    Truncated { expected_bytes: u64, actual_bytes: u64 },
    /// A pixel value is non-finite or outside [0, 1].
    PixelOutOfRange { value: f32 },
    /// A label is not smaller than the declared class count.
    LabelOutOfRange { label: u32, num_classes: u32 },
    /// The metadata blob is not valid UTF-8 JSON.
    CorruptMetadata { detail: String },
    /// A header or payload field is structurally invalid.
    InvalidField { detail: String },
    /// Bytes remain after the last declared field.
    TrailingBytes { count: u64 },
}

impl std::fmt::Display for FormatErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FormatErrorKind::BadMagic => write!(f, "bad magic bytes"),
            FormatErrorKind::VersionMismatch { expected, found } => {
                write!(f, "version mismatch (expected {expected}, found {found})")
            }
            FormatErrorKind::Truncated { expected_bytes, actual_bytes } => write!(
                f,
                "truncated file (expected at least {expected_bytes} bytes, got {actual_bytes})"
            ),
            FormatErrorKind::PixelOutOfRange { value } => {
                write!(f, "pixel value {value} outside [0, 1]")
            }
            FormatErrorKind::LabelOutOfRange { label, num_classes } => {
                write!(f, "label {label} not below class count {num_classes}")
            }
            FormatErrorKind::CorruptMetadata { detail } => write!(f, "corrupt metadata: {detail}"),
            FormatErrorKind::InvalidField { detail } => write!(f, "invalid field: {detail}"),
            FormatErrorKind::TrailingBytes { count } => {
                write!(f, "{count} unexpected trailing bytes")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible pairing policy: {0}")]
    InfeasiblePolicy(String),

    #[error("invalid config: {0}")]
    Config(String),

    /// Byte-level file format violation; `offset` is where the reader stopped.
    #[error("{path}: {kind} at byte offset {offset}")]
    Format { path: String, offset: u64, kind: FormatErrorKind },

    #[error("non-finite value in layer `{layer}`: {detail}")]
    Numeric { layer: String, detail: String },

    #[error("training diverged at epoch {epoch}: {detail}")]
    Training { epoch: usize, detail: String },

    #[error("integrity violation: {0}")]
    Integrity(String),

    /// Per-example failure during whole-dataset forging.
    #[error("example {index}: {source}")]
    Example {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// Pipeline stage failure; partial artifacts stay on disk with a FAILED marker.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("metadata encoding failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the failure is something the caller can fix (bad flags, bad
    /// files, infeasible requests) as opposed to an internal numeric or
    /// training fault. The CLI maps user errors to exit code 1 and internal
    /// ones to exit code 2.
    pub fn is_user_error(&self) -> bool {
        match self {
            Error::InvalidArgument(_)
            | Error::InfeasiblePolicy(_)
            | Error::Config(_)
            | Error::Format { .. }
            | Error::Integrity(_)
            | Error::Io(_) => true,
            Error::Numeric { .. } | Error::Training { .. } | Error::Json(_) => false,
            Error::Example { source, .. } | Error::Stage { source, .. } => source.is_user_error(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
