use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("shape mismatch in {context}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        context: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("non-finite value produced by layer {layer}")]
    NonFinite { layer: String },
    #[error("loss mask selects no entries")]
    EmptyMask,
    #[error("index {index} out of range for {what} of length {len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("invalid model specification: {0}")]
    Spec(String),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error("unsupported model file version {found} (expected {expected})")]
    Version { expected: u32, found: u32 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl NetError {
    pub fn kind(&self) -> &'static str {
        match self {
            NetError::ShapeMismatch { .. } => "ShapeMismatch",
            NetError::NonFinite { .. } => "NonFinite",
            NetError::EmptyMask => "EmptyMask",
            NetError::IndexOutOfRange { .. } => "IndexOutOfRange",
            NetError::Spec(_) => "SpecError",
            NetError::Format(_) => "FormatError",
            NetError::Version { .. } => "VersionError",
            NetError::Io(_) => "IoError",
        }
    }

    pub(crate) fn shape(context: impl Into<String>, expected: &[usize], found: &[usize]) -> Self {
        NetError::ShapeMismatch {
            context: context.into(),
            expected: expected.to_vec(),
            found: found.to_vec(),
        }
    }
}

pub type Result<T> = std::result::Result<T, NetError>;
