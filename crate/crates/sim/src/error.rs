use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scene parse error at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },

    #[error("invalid scene: {0}")]
    Invalid(String),

    #[error(transparent)]
    Core(#[from] glassnav_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for SimError {
    fn from(e: serde_json::Error) -> Self {
        SimError::Parse {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        }
    }
}

pub type SimResult<T> = std::result::Result<T, SimError>;
