//! Experiment harness: configuration, scheme dispatch, seeded runs and
//! sweeps, the brute-force oracle and the gradient gate.

pub mod config;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod oracle;
pub mod records;
pub mod schemes;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use schemes::Scheme;
