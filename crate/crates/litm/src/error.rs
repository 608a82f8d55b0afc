use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: String, expected: u32 },
    #[error("file truncated: expected {expected} bytes of records, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("inconsistent contents: {0}")]
    Inconsistent(String),
    #[error("malformed header: {0}")]
    Malformed(String),
}

#[derive(Debug, thiserror::Error)]
pub enum LitmError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Format { path: PathBuf, source: FormatError },
    #[error("configuration: {0}")]
    Config(String),
    #[error("training failed: {0}")]
    Train(litm_core::Error),
    #[error("evaluation failed: {0}")]
    Eval(String),
    #[error(transparent)]
    Core(#[from] litm_core::Error),
}

impl LitmError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, source: FormatError) -> Self {
        Self::Format { path: path.to_path_buf(), source }
    }

    /// Process exit code, one per error class. 2 is left to argument parsing.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 3,
            Self::Io { .. } => 4,
            Self::Format { source, .. } => match source {
                FormatError::Version { .. } => 5,
                FormatError::Truncated { .. } => 6,
                FormatError::Inconsistent(_) => 7,
                FormatError::Malformed(_) => 8,
            },
            Self::Train(_) => 9,
            Self::Eval(_) => 10,
            Self::Core(_) => 11,
        }
    }
}
