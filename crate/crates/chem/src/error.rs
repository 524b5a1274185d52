use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChemError {
    #[error("SMILES syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("valence exceeded on atom {atom} ({element}): bond order sum {used} > {max}")]
    Valence {
        atom: usize,
        element: &'static str,
        used: u32,
        max: u32,
    },
    #[error("no Gasteiger parameters for {element} ({hybridization})")]
    MissingParameter {
        element: &'static str,
        hybridization: &'static str,
    },
    #[error("layout extent {extent:.2} exceeds image capacity {capacity:.2}")]
    LayoutOverflow { extent: f64, capacity: f64 },
    #[error("atoms {first} and {second} map to the same pixel ({row}, {col})")]
    PixelCollision {
        first: usize,
        second: usize,
        row: usize,
        col: usize,
    },
    #[error("SMILES of length {length} exceeds encoder capacity {capacity}")]
    TooLong { length: usize, capacity: usize },
    #[error("character {0:?} is not in the vocabulary")]
    UnknownCharacter(char),
    #[error("descriptor registry mismatch: expected {expected}, found {found}")]
    RegistryMismatch { expected: String, found: String },
    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("io: {0}")]
    Io(String),
    #[error("format: {0}")]
    Format(String),
}

impl ChemError {
    pub(crate) fn syntax(position: usize, message: impl Into<String>) -> Self {
        ChemError::Syntax {
            position,
            message: message.into(),
        }
    }

    /// Short, stable category name used in reject logs.
    pub fn kind(&self) -> &'static str {
        match self {
            ChemError::Syntax { .. } => "SyntaxError",
            ChemError::Valence { .. } => "ValenceError",
            ChemError::MissingParameter { .. } => "MissingParameter",
            ChemError::LayoutOverflow { .. } => "LayoutOverflow",
            ChemError::PixelCollision { .. } => "PixelCollision",
            ChemError::TooLong { .. } => "TooLong",
            ChemError::UnknownCharacter(_) => "UnknownCharacter",
            ChemError::RegistryMismatch { .. } => "RegistryMismatch",
            ChemError::NonFinite { .. } => "NonFinite",
            ChemError::Empty(_) => "Empty",
            ChemError::Io(_) => "IoError",
            ChemError::Format(_) => "FormatError",
        }
    }
}

impl From<std::io::Error> for ChemError {
    fn from(e: std::io::Error) -> Self {
        ChemError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ChemError>;
