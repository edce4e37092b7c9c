use std::io;
use std::path::{Path, PathBuf};

/// Everything the command-line layer can fail with.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] molcap_core::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, line: usize, message: impl Into<String>) -> Self {
        Self::Format { path: path.to_path_buf(), line, message: message.into() }
    }

    /// Short category name printed with the error.
    pub fn category(&self) -> &'static str {
        use molcap_core::Error as E;
        match self {
            Self::Io { .. } => "io",
            Self::Format { .. } => "format",
            Self::Usage(_) => "config",
            Self::Core(e) => match e {
                E::Config(_) => "config",
                E::Version(_) => "version",
                E::Dimension(_) | E::Contract(_) => "contract",
                E::Divergence(_) => "divergence",
                E::NonFinite(_) | E::Evaluation(_) => "numeric",
                E::Smiles(_) => "smiles",
            },
        }
    }

    /// Process exit status for this error's category.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "io" => 3,
            "format" => 4,
            "version" => 5,
            "contract" => 6,
            "divergence" => 7,
            "numeric" => 8,
            "smiles" => 9,
            _ => 1,
        }
    }
}
