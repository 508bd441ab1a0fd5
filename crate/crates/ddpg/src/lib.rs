//! Deep deterministic policy gradient solver for joint SIM phase and power
//! optimization.
//!
//! [`train::train`] runs the full episode/step loop. The pieces it is built
//! from (state and action encodings, exploration noise, replay, the actor
//! and critic networks and a single learning step) are public so they can be
//! tested and reused on their own.

pub mod action;
pub mod actor;
pub mod agent;
pub mod config;
pub mod critic;
pub mod error;
pub mod replay;
pub mod state;
pub mod train;

pub use config::{AgentConfig, ChannelRefresh};
pub use error::{DdpgError, Result};
pub use train::{train, Environment, TrainResult};
