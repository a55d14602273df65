use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}:{line}: field `{field}`: {reason}", file.display())]
    Parse {
        file: PathBuf,
        line: usize,
        field: String,
        reason: String,
    },
    #[error("{}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] ppg_screen_core::Error),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse(file: &Path, line: usize, field: &str, reason: impl Into<String>) -> Self {
        Error::Parse {
            file: file.to_path_buf(),
            line,
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn format(path: &Path, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }

    /// 1 for bad input (data, config, flags), 2 for everything else.
    pub fn exit_code(&self) -> u8 {
        use ppg_screen_core::Error as Core;
        match self {
            Error::Io { source, .. } => match source.kind() {
                io::ErrorKind::NotFound | io::ErrorKind::InvalidData => 1,
                _ => 2,
            },
            Error::Core(Core::Diverged { .. }) => 2,
            Error::Core(Core::Fold { source, .. }) if matches!(**source, Core::Diverged { .. }) => 2,
            _ => 1,
        }
    }
}
