use std::fmt;
use std::path::PathBuf;

/// Structural problems found while decoding an EMB1 payload or its manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatErrorKind {
    BadMagic,
    BadVersion,
    Truncated,
    DimMismatch,
    TrailingData,
    NonFinite,
    BadManifest,
}

impl fmt::Display for FormatErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FormatErrorKind::BadMagic => "badMagic",
            FormatErrorKind::BadVersion => "badVersion",
            FormatErrorKind::Truncated => "truncated",
            FormatErrorKind::DimMismatch => "dimMismatch",
            FormatErrorKind::TrailingData => "trailingData",
            FormatErrorKind::NonFinite => "nonFinite",
            FormatErrorKind::BadManifest => "badManifest",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("zero-length vector cannot be normalized")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("empty input")]
    EmptyInput,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error ({kind}) in {path}: {detail}")]
    Format {
        kind: FormatErrorKind,
        path: PathBuf,
        detail: String,
    },
    #[error("catalog error: {0}")]
    Catalog(String),
    #[error("unknown class id {0}")]
    UnknownClass(u32),
    #[error("no embeddings for class {class_id} ({name})")]
    MissingClass { class_id: u32, name: String },
    #[error("bad template {pattern:?}: placeholder [c] must occur exactly once")]
    BadTemplate { pattern: String },
    #[error("k={k} exceeds gallery size {gallery}")]
    KTooLarge { k: usize, gallery: usize },
    #[error("length mismatch: {left} predictions vs {right} truths")]
    LengthMismatch { left: usize, right: usize },
    #[error("catalogs differ: {0}")]
    CatalogMismatch(String),
    #[error("records cannot be joined by sourceId: {0}")]
    JoinMismatch(String),
    #[error("batch item {index}: {source}")]
    BatchItem {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid synthetic data settings: {0}")]
    Synthetic(String),
    #[error("class center sampling failed after {0} rejections")]
    CenterSamplingFailed(usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(
        kind: FormatErrorKind,
        path: impl Into<PathBuf>,
        detail: impl Into<String>,
    ) -> Self {
        Error::Format {
            kind,
            path: path.into(),
            detail: detail.into(),
        }
    }

    /// The format error kind, if this is a decoding failure.
    pub fn format_kind(&self) -> Option<FormatErrorKind> {
        match self {
            Error::Format { kind, .. } => Some(*kind),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
