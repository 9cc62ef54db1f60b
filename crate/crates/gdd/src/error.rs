use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum GddError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{}: {source}", path.display())]
    Invalid {
        path: PathBuf,
        #[source]
        source: gdd_core::Error,
    },
    #[error(transparent)]
    Core(#[from] gdd_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<GddError>,
    },
}

impl GddError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GddError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        GddError::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            already @ GddError::Stage { .. } => already,
            other => GddError::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            GddError::Usage(_) => EXIT_USAGE,
            GddError::Io { .. } | GddError::Parse { .. } | GddError::Invalid { .. } => EXIT_INPUT,
            GddError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            GddError::Core(_) => EXIT_INPUT,
            GddError::Stage { source, .. } => source.exit_code(),
        }
    }
}

pub type Result<T> = std::result::Result<T, GddError>;
