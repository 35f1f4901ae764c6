use std::path::PathBuf;

use thiserror::Error;

use crate::dispatch::DispatchError;
use crate::fleet::FleetError;
use crate::metrics::MetricsError;
use crate::sim::SimError;
use crate::sor::SorError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {detail}", path.display())]
    Parse { path: PathBuf, detail: String },
    #[error(transparent)]
    Fleet(#[from] FleetError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Sor(#[from] SorError),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, detail: impl ToString) -> Self {
        Self::Parse {
            path: path.into(),
            detail: detail.to_string(),
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        if source.is_io_error() {
            match source.into_kind() {
                csv::ErrorKind::Io(e) => return Self::io(path, e),
                _ => unreachable!(),
            }
        }
        Self::Csv {
            path: path.into(),
            source,
        }
    }

    /// Whether this came from the filesystem rather than from bad content.
    pub fn is_io(&self) -> bool {
        matches!(self, Self::Io { .. })
    }
}
