use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown scheme `{0}` (expected random, codebook, zf, mmse, ao, drl or drl-upa)")]
    UnknownScheme(String),
    #[error("search space of {size} configurations exceeds the limit of {limit}")]
    SearchTooLarge { size: f64, limit: u64 },
    #[error("result file schema mismatch: {0}")]
    Schema(String),
    #[error(transparent)]
    Core(#[from] simstack_core::Error),
    #[error(transparent)]
    Ddpg(#[from] simstack_ddpg::DdpgError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
