use std::io;
use std::path::{Path, PathBuf};

pub type Result<T, E = ElgError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum ElgError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {reason}", path.display())]
    Parse { path: PathBuf, line: usize, reason: String },
    #[error("missing artifact {}; run the `{stage}` stage first", path.display())]
    MissingArtifact { stage: &'static str, path: PathBuf },
    #[error("corrupt graph file: {0}")]
    Corrupt(String),
    #[error("unsupported graph format `{0}` (expected `ELG v1`)")]
    Version(String),
    #[error(transparent)]
    Core(#[from] elg_core::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ElgError {
    pub fn io(path: &Path) -> impl FnOnce(io::Error) -> ElgError + '_ {
        move |source| ElgError::Io { path: path.to_path_buf(), source }
    }

    pub fn parse(path: &Path, line: usize, reason: impl Into<String>) -> ElgError {
        ElgError::Parse { path: path.to_path_buf(), line, reason: reason.into() }
    }

    /// 1 usage, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            ElgError::Usage(_) => 1,
            ElgError::Core(elg_core::Error::Config(_) | elg_core::Error::Rule { .. }) => 1,
            ElgError::Internal(_) => 3,
            _ => 2,
        }
    }
}
