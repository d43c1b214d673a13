use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("scene error: {0}")]
    Scene(#[from] glassnav_sim::SimError),
    #[error(transparent)]
    Core(#[from] glassnav_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 for bad input (config, scene or frame files), 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Scene(_) => 2,
            CliError::Core(glassnav_core::Error::FrameFormat { .. }) => 2,
            CliError::Core(glassnav_core::Error::InvalidConfig(_)) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
