use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{stage} stage failed: {source}")]
    Numerical {
        stage: &'static str,
        #[source]
        source: qpbec::Error,
    },

    #[error("gpe stage: run {tag} truncated at t = {t}; partial data kept in {}", dir.display())]
    Truncated { tag: String, t: f64, dir: PathBuf },

    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0} acceptance check(s) failed")]
    CheckFailed(usize),
}

impl CliError {
    /// 2 for configuration, 3 for numerical failure, 4 for failed checks
    /// and 1 for anything the file system throws at us.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical { .. } | Self::Truncated { .. } => 3,
            Self::CheckFailed(_) => 4,
            Self::Io { .. } => 1,
        }
    }

    pub(crate) fn numerical(stage: &'static str) -> impl FnOnce(qpbec::Error) -> Self {
        move |source| Self::Numerical { stage, source }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Self::Io { path, source }
    }
}
