use std::path::{Path, PathBuf};

use cvbench_neural::NeuralError;

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("sequence too short: needed {needed} points, got {got}")]
    InsufficientLength { needed: usize, got: usize },
    #[error("history too short: needed {needed} positions, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("invalid data: {0}")]
    Validation(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unsupported for this model: {0}")]
    Capability(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("fold {scene} of {model} failed: {source}")]
    Fold {
        model: String,
        scene: String,
        #[source]
        source: Box<CoreError>,
    },
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CoreError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    /// True for errors caused by user configuration rather than data or
    /// runtime failures.
    pub fn is_config(&self) -> bool {
        match self {
            CoreError::Config(_) | CoreError::Capability(_) => true,
            CoreError::Neural(NeuralError::Config(_)) => true,
            CoreError::Fold { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
