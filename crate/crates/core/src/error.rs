use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("empty corpus: {0}")]
    EmptyCorpus(String),
    #[error("unsatisfiable scene: {0}")]
    UnsatisfiableScene(String),
    #[error("cannot resolve asset: {0}")]
    Resolution(String),
    #[error("scene {scene_id}: {source}")]
    Scene {
        scene_id: u64,
        #[source]
        source: Box<Error>,
    },
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("external command failed: {0}")]
    External(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_scene(self, scene_id: u64) -> Self {
        match self {
            e @ Error::Scene { .. } => e,
            other => Error::Scene {
                scene_id,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, with any scene wrapper removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Scene { source, .. } => source.root(),
            other => other,
        }
    }
}
