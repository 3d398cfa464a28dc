use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported or corrupt image {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("region {x},{y},{w},{h} does not fit a {width}x{height} image")]
    Bounds {
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("field of view detection failed: {0}; supply a manual crop (--crop x,y,w,h)")]
    DetectionFailed(String),

    #[error("aponeurosis registration failed: {0}; a lower tubeness sigma (e.g. 8) may help")]
    RegistrationFailed(String),

    #[error("region of interest too small: {0}")]
    RoiTooSmall(String),

    #[error("orientation undefined: image has no gradient energy")]
    UndefinedOrientation,

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("fascicle line does not intersect the superficial aponeurosis")]
    NoIntersection,

    #[error("input error: {0}")]
    Input(String),

    #[error("invalid phantom spec: {0}")]
    Spec(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
