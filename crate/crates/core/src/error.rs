use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid spec: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("region of interest side {m} must be even and smaller than the map side {n}")]
    InvalidRoi { m: usize, n: usize },

    #[error("transparent obstacle neighborhood centroid coincides with the lidar cell")]
    DegenerateTon,

    #[error("grid dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("frame file line {line}: {msg}")]
    FrameFormat { line: usize, msg: String },

    #[error("pgm: {0}")]
    Pgm(String),

    #[error(transparent)]
    Io(#[from] IoError),
}

/// `std::io::Error` wrapper so [`Error`] can stay `Clone + PartialEq`.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{kind:?}: {message}")]
pub struct IoError {
    pub kind: std::io::ErrorKind,
    pub message: String,
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(IoError {
            kind: e.kind(),
            message: e.to_string(),
        })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
