use thiserror::Error;
use weakchem_chem::ChemError;
use weakchem_core::NetError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("dataset {0} has no usable records")]
    EmptyDataset(String),
    #[error("dataset of {size} records is too small for {folds} folds")]
    TooSmall { size: usize, folds: usize },
    #[error("only one class present in {0}")]
    OneClassOnly(&'static str),
    #[error("model was trained on {model} inputs but {requested} was requested")]
    ModalityMismatch { model: String, requested: String },
    #[error("model metadata is missing or invalid: {0}")]
    Metadata(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Chem(#[from] ChemError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code: 1 usage, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Net(e) => match e {
                NetError::NonFinite { .. } | NetError::EmptyMask => 3,
                NetError::Spec(_) => 1,
                _ => 2,
            },
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
