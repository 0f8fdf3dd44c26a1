use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("patch at ({x:.1}, {y:.1}) with size {size} crosses the image border")]
    BorderViolation { x: f32, y: f32, size: usize },

    #[error("non-finite loss component `{component}` at iteration {iteration}")]
    NonFinite { component: String, iteration: u64 },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's input rather than a bug or the environment.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Argument(_)
                | Error::Dataset(_)
                | Error::Metric(_)
                | Error::Checkpoint(_)
                | Error::BorderViolation { .. }
        )
    }
}
