use thiserror::Error;

/// Crate-wide error type. Variants carry enough context to reproduce the
/// failing call (shapes, indices, line numbers, parameter names).
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("row_lookup: index {index} out of range for extent {extent}")]
    IndexOutOfRange { index: usize, extent: usize },

    #[error("backward: loss node must be scalar, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("missing field {field} at line {line}")]
    MissingField { field: String, line: usize },

    #[error("training corpus is empty after normalization")]
    EmptyCorpus,

    #[error("target vocabulary size {target} is below the floor of {floor} (specials + base characters)")]
    VocabTooSmall { target: usize, floor: usize },

    #[error("need at least {min} documents to split, got {got}")]
    TooFewDocuments { got: usize, min: usize },

    #[error("source is empty after normalization and truncation")]
    EmptySource,

    #[error("no non-PAD target positions to score")]
    EmptyTarget,

    #[error("invalid split ratio {ratio:?}: all parts must be positive and sum to 100")]
    InvalidRatio { ratio: String },

    #[error("example of source length {length} exceeds the batch token budget {budget}")]
    BatchBudgetExceeded { length: usize, budget: usize },

    #[error("target id {id} is outside the distribution support {support}")]
    TargetOutOfSupport { id: u32, support: usize },

    #[error("non-finite gradient for parameter {name}")]
    NonFiniteGradient { name: String },

    #[error("training diverged (non-finite loss) at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },

    #[error("prediction/reference line counts differ: {predictions} vs {references}")]
    MisalignedFiles {
        predictions: usize,
        references: usize,
    },

    #[error("extended id {id} cannot be resolved against the example's out-of-vocabulary map")]
    UnresolvableId { id: u32 },

    #[error("out-of-vocabulary map does not match the encoded source: {message}")]
    InconsistentOovMap { message: String },

    #[error("checkpoint: {message}")]
    Checkpoint { message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
