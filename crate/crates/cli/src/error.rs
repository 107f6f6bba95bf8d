use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] fairfront::Error),

    #[error("{0}")]
    Usage(String),

    #[error("cannot access `{}`: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        use fairfront::Error as E;
        match self {
            CliError::Usage(_) => EXIT_VALIDATION,
            CliError::Io { .. } => EXIT_IO,
            CliError::Core(e) => match e {
                E::Convergence { .. } => EXIT_CONVERGENCE,
                E::Io(_) => EXIT_IO,
                E::Csv(c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => EXIT_IO,
                _ => EXIT_VALIDATION,
            },
        }
    }
}

/// Attaches `path` to bare I/O failures.
pub(crate) fn at_path<T>(path: &std::path::Path, r: fairfront::Result<T>) -> CliResult<T> {
    r.map_err(|e| match e {
        fairfront::Error::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        fairfront::Error::Csv(c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => {
            match c.into_kind() {
                csv::ErrorKind::Io(source) => CliError::Io {
                    path: path.to_path_buf(),
                    source,
                },
                _ => unreachable!(),
            }
        }
        other => CliError::Core(other),
    })
}

pub(crate) fn io_at(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}
