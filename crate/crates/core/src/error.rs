use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Every failure the core library can report.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("record `{id}` has no label")]
    Unlabeled { id: String },

    #[error("record `{id}` has no embedding")]
    MissingEmbedding { id: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("label {0} is not binary")]
    NonBinaryLabel(u8),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("training data for {model} needs both classes")]
    SingleClass { model: &'static str },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("zero-norm vector")]
    ZeroNorm,

    #[error("degenerate clustering: {0}")]
    DegenerateClustering(String),

    #[error("degenerate second stage: no label-2 records; fall back to a single-stage model")]
    DegenerateSecondStage,

    #[error("matrix is singular or ill-conditioned (condition estimate {0:e})")]
    Singular(f64),

    #[error("degenerate data: {0}")]
    Degenerate(&'static str),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
