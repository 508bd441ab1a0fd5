use thiserror::Error;

#[derive(Debug, Error)]
pub enum DdpgError {
    #[error(transparent)]
    Core(#[from] simstack_core::Error),
    #[error(transparent)]
    Nn(#[from] simstack_nn::NnError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("replay buffer holds {len} of {capacity} transitions; sampling needs a full buffer")]
    ReplayNotFull { len: usize, capacity: usize },
}

pub type Result<T> = std::result::Result<T, DdpgError>;
