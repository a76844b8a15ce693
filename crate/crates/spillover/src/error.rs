use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{0}")]
    Input(String),
    #[error("config: {0}")]
    Config(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Core(#[from] spillover_core::Error),
    #[error("internal: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn csv(path: &Path, source: csv::Error) -> Self {
        Error::Csv {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for input or configuration problems, 3 for degenerate data, 1 for
    /// anything else.
    pub fn exit_code(&self) -> i32 {
        use spillover_core::Error as C;
        match self {
            Error::Io { .. } | Error::Csv { .. } | Error::Input(_) | Error::Config(_) => 2,
            Error::Degenerate(_) => 3,
            Error::Core(c) => match c {
                C::InvalidRecord(_)
                | C::InvalidWindow(_)
                | C::InvalidCriteria(_)
                | C::InvalidLevel(_)
                | C::TooFewReplicates { .. }
                | C::InvalidParams(_)
                | C::InconsistentPanel(_) => 2,
                C::NoEligibleServers
                | C::EmptySupport
                | C::TooFewWindows(_)
                | C::TooFewDyads(_)
                | C::UndefinedRow(_)
                | C::Fabrication(_) => 3,
                C::UnknownWindow(_) | C::LayerMismatch(_) => 1,
            },
            Error::Internal(_) => 1,
        }
    }
}
